#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "qdpd/memory_polynomial.hpp"
#include "qdpd/signal.hpp"
#include "qdpd/signal_gen.hpp"

namespace qdpd {

struct MPConfig {
  int K = 5;  // nonlinear orders 1..K
  int L = 6;  // lags 0..L-1
  /// Ridge weight lambda in min |t - Phi a|^2 + lambda |a|^2.
  double regularization = 0.0;
  /// On an ill-conditioned, unregularised solve retry with
  /// lambda = 1e-10 trace(Phi^H Phi) instead of throwing.
  bool ridge_fallback = false;
  /// Condition number above which the design matrix counts as rank deficient.
  double max_condition = 1e12;

  int columns() const noexcept { return K * L; }
  void validate() const;
};

using MPCoefficients = MpGrid;

/// Design matrix: row n, column l*K + (k-1) holds x(n-l)|x(n-l)|^{k-1}, zero
/// for n < l.
Eigen::MatrixXcd build_regressor(const ComplexSignal& x, const MPConfig& config);

/// Rows [begin, end) of the design matrix, written into `out`.
void fill_regressor_rows(std::span<const cplx> x, const MPConfig& config, std::size_t begin,
                         std::size_t end, Eigen::Ref<Eigen::MatrixXcd> out);

struct Identification {
  MPCoefficients coeffs;
  double residual_mse = 0.0;
  /// 2-norm condition number of the column-equilibrated design matrix.
  double condition = 0.0;
  /// Ridge weight actually used.
  double ridge = 0.0;
};

/// Indirect learning: fits the post-inverse mapping the (aligned, gain
/// normalised) PA output onto the PA input, min_a |pa_in - Phi(pa_out) a|^2,
/// with a streamed Householder QR. Throws IllConditionedError when the design
/// matrix is rank deficient and no ridge is in effect.
Identification identify_postinverse(const ComplexSignal& pa_in,
                                    const ComplexSignal& pa_out_aligned, const MPConfig& config);

/// u(n) = sum_{k,l} a_{k,l} x(n-l)|x(n-l)|^{k-1} with zero history.
ComplexSignal apply_mp(const ComplexSignal& x, const MPCoefficients& coeffs);

struct ChannelMetrics {
  int qubit_id = 0;
  /// Relative amplitude error over the channel's active pulses.
  double delta_a = 0.0;
  /// Distortion power in the channel's band during its idle spans, dB
  /// relative to the mean reference tone power over all active spans.
  double leakage_db = 0.0;
};

struct LinearizationMetrics {
  double nmse_db = 0.0;
  std::vector<ChannelMetrics> channels;
};

struct MetricsOptions {
  double bandwidth = 4e6;
  double transition = 4e6;
};

/// Floor reported for exactly zero error.
inline constexpr double kMetricFloorDb = -200.0;

LinearizationMetrics linearization_metrics(const ComplexSignal& reference,
                                           const ComplexSignal& output_aligned,
                                           const std::vector<QubitChannel>& channels,
                                           const MetricsOptions& options = {});

double nmse_db(std::span<const cplx> reference, std::span<const cplx> output);

/// Columns k,l,re,im.
void write_coefficients_csv(std::ostream& out, const MPCoefficients& coeffs);
MPCoefficients read_coefficients_csv(std::istream& in);

/// Columns evaluation,nmse_db,qubit_id,delta_a,leakage_db; one row per channel.
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_rows(std::ostream& out, const std::string& evaluation,
                            const LinearizationMetrics& metrics);

}  // namespace qdpd
