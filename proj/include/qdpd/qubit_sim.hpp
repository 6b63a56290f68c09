#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "qdpd/signal.hpp"
#include "qdpd/signal_gen.hpp"

namespace qdpd {

struct QubitState {
  cplx alpha{1.0, 0.0};
  cplx beta{0.0, 0.0};

  static QubitState ground() { return {}; }
  static QubitState excited() { return {cplx{}, cplx{1.0, 0.0}}; }
  double norm_sq() const noexcept { return std::norm(alpha) + std::norm(beta); }
  void normalize() noexcept;
};

/// Row-major 2x2 complex matrix.
struct Matrix2 {
  std::array<cplx, 4> m{};

  cplx& operator()(int r, int c) { return m[static_cast<std::size_t>(2 * r + c)]; }
  cplx operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }

  static Matrix2 identity() { return {{cplx{1.0}, cplx{}, cplx{}, cplx{1.0}}}; }
  static Matrix2 pauli_x() { return {{cplx{}, cplx{1.0}, cplx{1.0}, cplx{}}}; }
  static Matrix2 pauli_y() { return {{cplx{}, cplx{0.0, -1.0}, cplx{0.0, 1.0}, cplx{}}}; }
  static Matrix2 pauli_z() { return {{cplx{1.0}, cplx{}, cplx{}, cplx{-1.0}}}; }

  Matrix2 adjoint() const;
  cplx det() const;
  cplx trace() const { return m[0] + m[3]; }
  friend Matrix2 operator*(const Matrix2& a, const Matrix2& b);
  friend Matrix2 operator+(const Matrix2& a, const Matrix2& b);
  friend Matrix2 operator*(cplx s, const Matrix2& a);
  QubitState apply(const QubitState& psi) const;
  /// max |(U^H U - I)_ij|
  double unitarity_error() const;
  double max_abs_diff(const Matrix2& other) const;
};

/// A 2x2 unitary. Kept as a distinct name for readability; the invariant is
/// U^H U = I.
using Unitary2 = Matrix2;

/// Point on the Bloch sphere.
struct BlochPoint {
  double x = 0.0, y = 0.0, z = 1.0;

  static BlochPoint from_state(const QubitState& psi);
  double theta() const;
  double phi() const;
};

/// H = -(Omega_R / 2)(Re{s} sigma_x + Im{s} sigma_y).
Matrix2 hamiltonian_step(cplx s_bb_sample, double rabi_max);

/// exp(-j H dt) for Hermitian H, in closed form via
/// exp(-j (h0 I + h.sigma) dt) = exp(-j h0 dt)(cos(|h| dt) I - j sin(|h| dt) h^.sigma).
Unitary2 step_unitary(const Matrix2& hamiltonian, double dt);

/// Ideal rotation realised by a constant drive of phase `phase` for a total
/// angle `angle` under the Hamiltonian above: exp(+j (angle/2)(cos(phase) sx + sin(phase) sy)).
Unitary2 drive_rotation(double phase, double angle);

struct EvolveOptions {
  int substeps = 1;
  QubitState initial = QubitState::ground();
  bool record_trajectory = true;
  /// Re-orthonormalise the accumulated unitary every this many steps.
  std::size_t renormalize_every = 4096;
};

struct Evolution {
  Unitary2 unitary = Unitary2::identity();
  QubitState final_state;
  /// Initial state followed by the state after every sample (not every substep).
  std::vector<BlochPoint> trajectory;
};

/// Piecewise-constant product U = U_{N-1} ... U_1 U_0 (later steps multiply
/// from the left), with s_bb held over each sample and split into `substeps`
/// steps of dt = 1 / (sample_rate * substeps).
Evolution evolve(const ComplexSignal& s_bb, double rabi_max, const EvolveOptions& options = {});
Evolution evolve(const ComplexSignal& s_bb, double rabi_max, int substeps);

/// |<psi_ref|psi>|^2.
double fidelity(const QubitState& psi, const QubitState& psi_ref);

struct DownconvertOptions {
  double bandwidth = 4e6;
  double transition = 4e6;
  /// Normalise the first driving pulse to this amplitude and zero phase.
  bool calibrate = true;
  double calibration_amplitude = 1.0;
  double calibration_phase = 0.0;  // programmed phase of the first pulse
  /// Fraction of the detection threshold relative to the strongest sample.
  double detect_threshold = 0.5;
  /// Shortest run above threshold accepted as a driving pulse, in samples.
  std::size_t min_pulse_samples = 8;
};

/// Mix the IF signal down by freq_offset, low-pass it (zero phase) and, when
/// calibrating, divide by the mean complex value over the central half of the
/// first driving pulse so that pulse has amplitude calibration_amplitude and
/// phase calibration_phase. Throws CalibrationError if no pulse is found.
ComplexSignal downconvert_channel(const ComplexSignal& if_signal, double freq_offset,
                                  const DownconvertOptions& options = {});
ComplexSignal downconvert_channel(const ComplexSignal& if_signal, double freq_offset,
                                  double bandwidth);

/// State reached from |0> by driving the qubit with the undistorted transmit
/// signal (neighbouring tones included), through the same downconversion as
/// the measured path.
QubitState theoretical_reference_state(const ComplexSignal& x_if, const QubitChannel& channel,
                                       double rabi_max, const DownconvertOptions& options = {});

/// Columns t,x,y,z.
void write_trajectory_csv(std::ostream& out, const std::vector<BlochPoint>& trajectory,
                          double dt, double t0 = 0.0);

}  // namespace qdpd
