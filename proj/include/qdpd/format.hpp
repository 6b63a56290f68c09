#pragma once

#include <string>

namespace qdpd {

/// Shortest decimal text that round-trips the value. Used for every CSV cell
/// so that reruns are byte-identical.
std::string fmt_double(double value);

}  // namespace qdpd
