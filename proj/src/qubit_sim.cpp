#include "qdpd/qubit_sim.hpp"

#include <cmath>
#include <ostream>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {

void QubitState::normalize() noexcept {
  const double n = std::sqrt(norm_sq());
  if (n > 0.0) {
    alpha /= n;
    beta /= n;
  }
}

Matrix2 Matrix2::adjoint() const {
  return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
}

cplx Matrix2::det() const { return m[0] * m[3] - m[1] * m[2]; }

Matrix2 operator*(const Matrix2& a, const Matrix2& b) {
  return {{a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
           a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]}};
}

Matrix2 operator+(const Matrix2& a, const Matrix2& b) {
  return {{a.m[0] + b.m[0], a.m[1] + b.m[1], a.m[2] + b.m[2], a.m[3] + b.m[3]}};
}

Matrix2 operator*(cplx s, const Matrix2& a) {
  return {{s * a.m[0], s * a.m[1], s * a.m[2], s * a.m[3]}};
}

QubitState Matrix2::apply(const QubitState& psi) const {
  return {m[0] * psi.alpha + m[1] * psi.beta, m[2] * psi.alpha + m[3] * psi.beta};
}

double Matrix2::unitarity_error() const {
  const Matrix2 p = adjoint() * *this;
  return p.max_abs_diff(identity());
}

double Matrix2::max_abs_diff(const Matrix2& other) const {
  double e = 0.0;
  for (std::size_t i = 0; i < 4; ++i) e = std::max(e, std::abs(m[i] - other.m[i]));
  return e;
}

BlochPoint BlochPoint::from_state(const QubitState& psi) {
  const cplx c = std::conj(psi.alpha) * psi.beta;
  return {2.0 * c.real(), 2.0 * c.imag(), std::norm(psi.alpha) - std::norm(psi.beta)};
}

double BlochPoint::theta() const { return std::acos(std::clamp(z, -1.0, 1.0)); }
double BlochPoint::phi() const { return std::atan2(y, x); }

Matrix2 hamiltonian_step(cplx s, double rabi_max) {
  const double hx = -0.5 * rabi_max * s.real();
  const double hy = -0.5 * rabi_max * s.imag();
  return {{cplx{}, cplx{hx, -hy}, cplx{hx, hy}, cplx{}}};
}

Unitary2 step_unitary(const Matrix2& h, double dt) {
  if (!(dt > 0.0)) throw ParameterError("time step must be positive");
  // H = h0 I + hx sx + hy sy + hz sz
  const double h0 = 0.5 * (h(0, 0).real() + h(1, 1).real());
  const double hz = 0.5 * (h(0, 0).real() - h(1, 1).real());
  const double hx = 0.5 * (h(0, 1).real() + h(1, 0).real());
  const double hy = 0.5 * (h(1, 0).imag() - h(0, 1).imag());
  const double mag = std::sqrt(hx * hx + hy * hy + hz * hz);
  const double c = std::cos(mag * dt);
  const double s = mag > 0.0 ? std::sin(mag * dt) / mag : 0.0;
  // c I - j s (h.sigma)
  Unitary2 u{{cplx{c, -s * hz}, cplx{-s * hy, -s * hx}, cplx{s * hy, -s * hx}, cplx{c, s * hz}}};
  if (h0 != 0.0) u = std::polar(1.0, -h0 * dt) * u;
  return u;
}

Unitary2 drive_rotation(double phase, double angle) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  // c I + j s (cos(phase) sx + sin(phase) sy)
  const cplx off_upper = cplx{0.0, s} * std::polar(1.0, -phase);
  const cplx off_lower = cplx{0.0, s} * std::polar(1.0, phase);
  return {{cplx{c}, off_upper, off_lower, cplx{c}}};
}

namespace {

// Gram-Schmidt on the columns.
void reorthonormalize(Unitary2& u) {
  cplx a0 = u(0, 0), a1 = u(1, 0);
  const double n0 = std::sqrt(std::norm(a0) + std::norm(a1));
  a0 /= n0;
  a1 /= n0;
  cplx b0 = u(0, 1), b1 = u(1, 1);
  const cplx proj = std::conj(a0) * b0 + std::conj(a1) * b1;
  b0 -= proj * a0;
  b1 -= proj * a1;
  const double n1 = std::sqrt(std::norm(b0) + std::norm(b1));
  u = {{a0, b0 / n1, a1, b1 / n1}};
}

}  // namespace

Evolution evolve(const ComplexSignal& s_bb, double rabi_max, const EvolveOptions& options) {
  if (options.substeps < 1) throw ParameterError("substeps must be >= 1");
  const double dt = 1.0 / (s_bb.sample_rate() * options.substeps);
  const std::size_t every = std::max<std::size_t>(options.renormalize_every, 1);

  Evolution ev;
  QubitState psi = options.initial;
  if (options.record_trajectory) {
    ev.trajectory.reserve(s_bb.size() + 1);
    ev.trajectory.push_back(BlochPoint::from_state(psi));
  }
  std::size_t steps = 0;
  for (const cplx s : s_bb.samples()) {
    const Unitary2 step = step_unitary(hamiltonian_step(s, rabi_max), dt);
    for (int k = 0; k < options.substeps; ++k) {
      ev.unitary = step * ev.unitary;
      psi = step.apply(psi);
      if (++steps % every == 0) {
        reorthonormalize(ev.unitary);
        psi.normalize();
      }
    }
    if (options.record_trajectory) ev.trajectory.push_back(BlochPoint::from_state(psi));
  }
  psi.normalize();
  ev.final_state = psi;
  return ev;
}

Evolution evolve(const ComplexSignal& s_bb, double rabi_max, int substeps) {
  EvolveOptions o;
  o.substeps = substeps;
  return evolve(s_bb, rabi_max, o);
}

double fidelity(const QubitState& psi, const QubitState& psi_ref) {
  const cplx overlap = std::conj(psi_ref.alpha) * psi.alpha + std::conj(psi_ref.beta) * psi.beta;
  return std::clamp(std::norm(overlap), 0.0, 1.0);
}

ComplexSignal downconvert_channel(const ComplexSignal& if_signal, double freq_offset,
                                  const DownconvertOptions& o) {
  const double nyquist = 0.5 * if_signal.sample_rate();
  if (std::abs(freq_offset) + 0.5 * o.bandwidth >= nyquist) {
    throw ParameterError("channel band exceeds the Nyquist frequency");
  }
  ComplexSignal bb = dsp::extract_tone(if_signal, freq_offset, o.bandwidth, o.transition);
  if (!o.calibrate) return bb;

  double peak = 0.0;
  for (const auto& v : bb.samples()) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw CalibrationError("no driving pulse found: channel is silent");
  const double threshold = o.detect_threshold * peak;

  // First run above threshold that is long enough to be a pulse.
  std::size_t begin = 0, end = 0;
  for (std::size_t i = 0; i < bb.size();) {
    if (std::abs(bb[i]) <= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < bb.size() && std::abs(bb[j]) > threshold) ++j;
    if (j - i >= o.min_pulse_samples) {
      begin = i;
      end = j;
      break;
    }
    i = j;
  }
  if (end == 0) throw CalibrationError("no driving pulse found for calibration");

  const std::size_t len = end - begin;
  cplx mean{};
  for (std::size_t i = begin + len / 4; i < end - len / 4; ++i) mean += bb[i];
  mean /= static_cast<double>(end - len / 4 - (begin + len / 4));
  bb *= std::polar(o.calibration_amplitude, o.calibration_phase) / mean;
  return bb;
}

ComplexSignal downconvert_channel(const ComplexSignal& if_signal, double freq_offset,
                                  double bandwidth) {
  DownconvertOptions o;
  o.bandwidth = bandwidth;
  return downconvert_channel(if_signal, freq_offset, o);
}

QubitState theoretical_reference_state(const ComplexSignal& x_if, const QubitChannel& channel,
                                       double rabi_max, const DownconvertOptions& options) {
  const auto bb = downconvert_channel(x_if, channel.freq_offset, options);
  EvolveOptions eo;
  eo.record_trajectory = false;
  return evolve(bb, rabi_max, eo).final_state;
}

void write_trajectory_csv(std::ostream& out, const std::vector<BlochPoint>& trajectory, double dt,
                          double t0) {
  out << "t,x,y,z\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& p = trajectory[i];
    out << fmt_double(t0 + static_cast<double>(i) * dt) << ',' << fmt_double(p.x) << ','
        << fmt_double(p.y) << ',' << fmt_double(p.z) << '\n';
  }
}

}  // namespace qdpd
