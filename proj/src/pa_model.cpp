#include "qdpd/pa_model.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {

double PAParams::linear_gain() const { return std::pow(10.0, linear_gain_db / 20.0); }

void PAParams::validate() const {
  if (!(ltm_time_constant > 0.0)) throw ParameterError("ltm_time_constant must be positive");
  if (nl_coeffs.size() == 0) throw ParameterError("PA kernel is empty");
}

PAParams PAParams::default_device() {
  PAParams p;
  p.linear_gain_db = 25.48;
  // Static branch b_k: |f(1)| = 0.70 (-3.1 dB), arg f(1) = 9.9 deg, AM/AM
  // monotone up to |x| ~ 1.5 so predistorted peaks stay on the rising side.
  const std::array<std::pair<int, cplx>, 4> branch = {{
      {1, {1.0, 0.0}},
      {3, {-0.45, 0.16}},
      {5, {0.17, -0.045}},
      {7, {-0.03, 0.006}},
  }};
  // Short-term memory: relative lag weights at -20, -26 and -30 dB.
  // Normalised to unit sum so the small-signal gain at DC is exactly G_lin.
  std::array<cplx, 4> lag = {
      cplx{1.0, 0.0},
      std::polar(0.1, -0.6),
      std::polar(std::pow(10.0, -26.0 / 20.0), 1.1),
      std::polar(std::pow(10.0, -30.0 / 20.0), -2.0),
  };
  cplx lag_sum{};
  for (const auto& w : lag) lag_sum += w;
  for (auto& w : lag) w /= lag_sum;
  p.nl_coeffs = MpGrid(7, static_cast<int>(lag.size()));
  for (int l = 0; l < static_cast<int>(lag.size()); ++l) {
    for (const auto& [k, b] : branch) p.nl_coeffs.at(k, l) = b * lag[static_cast<std::size_t>(l)];
  }
  p.ltm_kappa = 0.05;
  p.ltm_time_constant = 5e-6;
  p.noise_floor_dbc = -70.0;
  p.rng_seed = 1;
  return p;
}

PAParams PAParams::linear(double gain_db) {
  PAParams p;
  p.linear_gain_db = gain_db;
  p.nl_coeffs = MpGrid::identity(1, 1);
  p.ltm_kappa = 0.0;
  p.noise_floor_dbc.reset();
  return p;
}

ThermalState::ThermalState(double time_constant, double sample_rate)
    : alpha_(-std::expm1(-1.0 / (time_constant * sample_rate))) {}

ComplexSignal apply_pa(const PAParams& params, const ComplexSignal& input) {
  params.validate();
  if (input.empty()) throw ParameterError("PA input is empty");

  auto y = evaluate_mp(input.samples(), params.nl_coeffs);
  const double g = params.linear_gain();

  if (params.ltm_kappa != 0.0) {
    ThermalState thermal(params.ltm_time_constant, input.sample_rate());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] *= g * (1.0 + params.ltm_kappa * thermal.update(std::norm(input[i])));
    }
  } else {
    for (auto& v : y) v *= g;
  }

  if (params.noise_floor_dbc) {
    // Full-scale output power is g^2; split evenly between I and Q.
    const double sigma = g * std::sqrt(0.5 * std::pow(10.0, *params.noise_floor_dbc / 10.0));
    std::mt19937_64 rng(params.rng_seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& v : y) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cplx(re, im);
    }
  }
  return ComplexSignal(std::move(y), input.sample_rate());
}

std::vector<AmCurvePoint> am_curves(const PAParams& params, int n_points, double max_amplitude) {
  if (n_points < 2) throw ParameterError("am_curves needs at least two points");
  const auto& c = params.nl_coeffs;
  const double g = params.linear_gain();

  // Constant input v on every lag: y = g * v * sum_{k,l} b_{k,l} |v|^{k-1}.
  auto branch_gain = [&](double r) {
    cplx sum{};
    for (int l = 0; l < c.memory_depth(); ++l) {
      for (int k = 1; k <= c.max_order(); ++k) sum += c.at(k, l) * std::pow(r, k - 1);
    }
    return sum;
  };
  const double phase0 = std::arg(branch_gain(0.0));

  std::vector<AmCurvePoint> out;
  for (int i = 0; i < n_points; ++i) {
    const double r = max_amplitude * i / (n_points - 1);
    const cplx h = branch_gain(r);
    double dphi = std::arg(h) - phase0;
    dphi = std::remainder(dphi, 2.0 * std::numbers::pi);
    out.push_back({r, g * r * std::abs(h), dphi * 180.0 / std::numbers::pi});
  }
  return out;
}

void write_am_curves_csv(std::ostream& out, const std::vector<AmCurvePoint>& curve) {
  out << "a_in,a_out,phase_deg\n";
  for (const auto& p : curve) {
    out << fmt_double(p.a_in) << ',' << fmt_double(p.a_out) << ',' << fmt_double(p.phase_deg)
        << '\n';
  }
}

cplx measure_linear_gain(const PAParams& params, const ComplexSignal& probe) {
  if (!(probe.energy() > 0.0)) throw ParameterError("probe has no energy");
  const auto y = apply_pa(params, probe);
  return dsp::ls_gain(y.samples(), probe.samples());
}

}  // namespace qdpd
