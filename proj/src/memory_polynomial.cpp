#include "qdpd/memory_polynomial.hpp"

#include <string>

#include "qdpd/errors.hpp"

namespace qdpd {

MpGrid::MpGrid(int max_order, int memory_depth)
    : max_order_(max_order), memory_depth_(memory_depth) {
  if (max_order < 1 || memory_depth < 1) {
    throw ParameterError("memory polynomial needs K >= 1 and L >= 1");
  }
  coeffs_.assign(static_cast<std::size_t>(max_order) * static_cast<std::size_t>(memory_depth), {});
}

std::size_t MpGrid::index(int order, int lag) const {
  if (order < 1 || order > max_order_ || lag < 0 || lag >= memory_depth_) {
    throw ParameterError("coefficient (" + std::to_string(order) + ", " + std::to_string(lag) +
                         ") outside grid");
  }
  return static_cast<std::size_t>(lag) * static_cast<std::size_t>(max_order_) +
         static_cast<std::size_t>(order - 1);
}

cplx& MpGrid::at(int order, int lag) { return coeffs_[index(order, lag)]; }
cplx MpGrid::at(int order, int lag) const { return coeffs_[index(order, lag)]; }

MpGrid MpGrid::identity(int max_order, int memory_depth) {
  MpGrid g(max_order, memory_depth);
  g.at(1, 0) = 1.0;
  return g;
}

std::vector<cplx> evaluate_mp(std::span<const cplx> x, const MpGrid& grid) {
  const int K = grid.max_order();
  const int L = grid.memory_depth();
  const std::size_t n = x.size();

  // Static branch per lag: f_l(v) = sum_k c_{k,l} v |v|^{k-1}, then delay by l.
  std::vector<cplx> y(n);
  for (int l = 0; l < L; ++l) {
    const auto c = grid.flat().subspan(static_cast<std::size_t>(l) * static_cast<std::size_t>(K),
                                       static_cast<std::size_t>(K));
    bool any = false;
    for (const auto& v : c) any |= v != cplx{};
    if (!any) continue;
    for (std::size_t i = static_cast<std::size_t>(l); i < n; ++i) {
      const cplx v = x[i - static_cast<std::size_t>(l)];
      const double r = std::abs(v);
      // Horner in |v|.
      cplx poly = c[static_cast<std::size_t>(K - 1)];
      for (int k = K - 2; k >= 0; --k) poly = poly * r + c[static_cast<std::size_t>(k)];
      y[i] += v * poly;
    }
  }
  return y;
}

}  // namespace qdpd
