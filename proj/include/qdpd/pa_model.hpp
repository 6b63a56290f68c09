#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qdpd/memory_polynomial.hpp"
#include "qdpd/signal.hpp"

namespace qdpd {

/// Synthetic behavioural power amplifier
///
///   y(n) = G_lin (1 + kappa w(n)) sum_{k,l} b_{k,l} x(n-l) |x(n-l)|^{k-1} + nu(n)
///
/// where w is the one-pole low-pass of |x|^2 (a thermal state that starts cold
/// at every call) and nu is complex white noise. Input amplitude 1.0 is full
/// scale.
struct PAParams {
  double linear_gain_db = 25.48;
  MpGrid nl_coeffs = MpGrid::identity(1, 1);
  /// Gain change per unit of filtered |x|^2. May be negative.
  double ltm_kappa = 0.0;
  double ltm_time_constant = 5e-6;  // seconds
  /// Noise power relative to a full-scale output; nullopt disables noise.
  std::optional<double> noise_floor_dbc;
  std::uint64_t rng_seed = 1;

  double linear_gain() const;
  void validate() const;

  /// Default ground-truth device: 7th-order odd kernel with ~3 dB compression
  /// and ~10 deg AM/PM at full scale, four short-term memory taps at 0, -20,
  /// -26 and -30 dB, +5 % thermal gain per unit power with 5 us time constant,
  /// noise at -70 dBc.
  static PAParams default_device();
  /// b_{1,0} = 1 only; no thermal memory, no noise.
  static PAParams linear(double gain_db = 25.48);
};

/// Sample-by-sample thermal state: w(n) = w(n-1) + alpha (|x(n)|^2 - w(n-1)).
class ThermalState {
 public:
  ThermalState(double time_constant, double sample_rate);
  double update(double instantaneous_power) noexcept {
    w_ += alpha_ * (instantaneous_power - w_);
    return w_;
  }
  double value() const noexcept { return w_; }
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  double w_ = 0.0;
};

ComplexSignal apply_pa(const PAParams& params, const ComplexSignal& input);

struct AmCurvePoint {
  double a_in;
  double a_out;
  double phase_deg;  // relative to the small-signal phase
};

/// Static AM/AM and AM/PM: every lag sees the same constant input and the
/// thermal term is held at zero. Input amplitudes are evenly spaced in
/// [0, max_amplitude].
std::vector<AmCurvePoint> am_curves(const PAParams& params, int n_points,
                                    double max_amplitude = 1.0);
void write_am_curves_csv(std::ostream& out, const std::vector<AmCurvePoint>& curve);

/// Complex LS gain <y, x> / <x, x> of the PA output against the probe.
cplx measure_linear_gain(const PAParams& params, const ComplexSignal& probe);

}  // namespace qdpd
