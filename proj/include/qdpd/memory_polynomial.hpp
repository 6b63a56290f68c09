#pragma once

#include <span>
#include <vector>

#include "qdpd/signal.hpp"

namespace qdpd {

/// Complex coefficients c_{k,l} of a memory polynomial
///   y(n) = sum_{k=1..K} sum_{l=0..L-1} c_{k,l} x(n-l) |x(n-l)|^{k-1}
/// Orders are 1-based, lags 0-based. Storage is lag-major, order-minor, the
/// same as the regressor column ordering.
class MpGrid {
 public:
  MpGrid() = default;
  MpGrid(int max_order, int memory_depth);

  int max_order() const noexcept { return max_order_; }
  int memory_depth() const noexcept { return memory_depth_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  cplx& at(int order, int lag);
  cplx at(int order, int lag) const;

  /// Column index of (order, lag) in the regressor.
  std::size_t index(int order, int lag) const;

  std::span<const cplx> flat() const noexcept { return coeffs_; }
  std::span<cplx> flat() noexcept { return coeffs_; }

  /// Grid with c_{1,0} = 1 and all other entries zero.
  static MpGrid identity(int max_order, int memory_depth);

  bool operator==(const MpGrid&) const = default;

 private:
  int max_order_ = 0;
  int memory_depth_ = 0;
  std::vector<cplx> coeffs_;
};

/// Evaluates the memory polynomial with zero history before the first sample.
std::vector<cplx> evaluate_mp(std::span<const cplx> x, const MpGrid& grid);

}  // namespace qdpd
