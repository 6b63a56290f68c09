#pragma once

#include <iosfwd>

#include "qdpd/signal.hpp"

namespace qdpd {

struct SyncResult {
  /// Delay of `received` relative to `reference`, in samples, on a grid of
  /// 1 / upsample_factor.
  double delay_samples = 0.0;
  /// Least-squares gain of the delay-compensated preamble.
  cplx complex_gain{1.0, 0.0};
  /// Correlation peak over the largest sidelobe outside the main lobe, dB.
  double peak_metric = 0.0;
};

struct SyncOptions {
  /// Length of the synchronisation preamble at the start of both signals.
  std::size_t preamble_len = 0;
  int upsample_factor = 10;
  /// Alignment fails below this peak-to-sidelobe ratio.
  double min_peak_db = 6.0;
};

/// Locates the preamble of `received` against that of `reference`: both
/// windows are interpolated by transform-domain zero-padding, circularly
/// cross-correlated, and the peak lag is divided by the upsample factor.
/// Throws SyncError when the peak metric is below options.min_peak_db.
SyncResult estimate_alignment(const ComplexSignal& reference, const ComplexSignal& received,
                              const SyncOptions& options);
SyncResult estimate_alignment(const ComplexSignal& reference, const ComplexSignal& received,
                              int upsample_factor, std::size_t preamble_len);

/// Removes the delay (phase ramp), divides by the complex gain and drops the
/// first preamble_len samples. A nonzero payload_len must equal the length
/// that remains.
ComplexSignal align_and_strip(const ComplexSignal& received, const SyncResult& sync,
                              std::size_t preamble_len, std::size_t payload_len = 0);

/// One CSV row: delay,gain_re,gain_im,peak_db.
void write_sync_csv_header(std::ostream& out);
void write_sync_csv_row(std::ostream& out, const SyncResult& sync);

}  // namespace qdpd
