#pragma once

#include <cstdint>
#include <vector>

#include "qdpd/signal.hpp"

namespace qdpd {

enum class GateKind { XpiPlus, XpiMinus, YpiPlus, YpiMinus, Idle };

/// Drive phase of a gate: X -> 0, Y -> pi/2, -X -> pi, -Y -> 3 pi/2. With the
/// rotating-frame Hamiltonian H = -(Omega/2)(Re{s} sx + Im{s} sy) these
/// phases realise rotations about +x, +y, -x and -y. Idle maps to 0.
double gate_phase(GateKind kind);
/// The pi rotation that undoes `kind` (Idle is its own inverse).
GateKind inverse_gate(GateKind kind);
bool is_pi_gate(GateKind kind);
const char* gate_name(GateKind kind);

/// Envelope shape of a pulse. Only rectangular envelopes are implemented.
enum class PulseShape { Rectangular };

struct GatePulse {
  GateKind kind = GateKind::Idle;
  double amplitude = 0.0;   // normalised; 1.0 drives at the maximum Rabi rate
  double phase = 0.0;       // radians in [0, 2 pi)
  double duration = 0.0;    // seconds
  double start_time = 0.0;  // seconds
  PulseShape shape = PulseShape::Rectangular;

  double end_time() const noexcept { return start_time + duration; }
};

struct QubitChannel {
  int qubit_id = 0;
  double freq_offset = 0.0;  // Hz, relative to the digital IF centre
  std::vector<GatePulse> gates;

  double duration() const noexcept { return gates.empty() ? 0.0 : gates.back().end_time(); }
  /// Throws ParameterError on overlapping/gapped gates or broken amplitude rules.
  void validate() const;
};

/// How the second pi pulse of a block is chosen.
enum class BlockRule {
  /// Second pi pulse is the inverse of the first; the block unitary is the identity.
  InversePair,
  /// Both pi pulses drawn independently from {+-X, +-Y}; the block returns |0>
  /// to |0> but its unitary may be a z rotation.
  IndependentPi,
};

struct SequenceOptions {
  std::uint64_t rng_seed = 7;
  int n_qubits = 4;
  int n_sequences = 20;
  double pulse_duration = 1.6e-6;
  /// Amplitude of every pi pulse.
  double pi_amplitude = 1.0;
  /// One entry per qubit; empty selects default_tone_offsets(n_qubits).
  std::vector<double> freq_offsets;
  BlockRule block_rule = BlockRule::InversePair;
};

/// 20, 30, 40, ... MHz: qubits at 2.16, 2.17, ... GHz around a 2.14 GHz carrier.
std::vector<double> default_tone_offsets(int n_qubits);

/// Per qubit, n_sequences blocks of four equal pulses: two pi pulses and two
/// idles in random order, drawn independently for each qubit.
std::vector<QubitChannel> build_gate_sequence(const SequenceOptions& options);
std::vector<QubitChannel> build_gate_sequence(std::uint64_t rng_seed, int n_qubits,
                                              int n_sequences, double pulse_duration);

/// sum_m A_m rect((t - tau_m) / T_m) exp(j phi_m) sampled at `sample_rate`.
/// Every pi pulse must satisfy rabi_max * A * T = pi.
ComplexSignal baseband_of_channel(const QubitChannel& channel, double sample_rate,
                                  double rabi_max);

struct MultitoneSignal {
  ComplexSignal signal;
  /// Mean power of each tone while its pulses are active, dB relative to an
  /// amplitude-1 tone. -inf for a channel that never drives.
  std::vector<double> tone_power_db;
};

/// Single-sideband (analytic) sum of the channels' basebands shifted to their
/// offsets: sum_n s_n(t) exp(j 2 pi f_n t).
MultitoneSignal assemble_multitone_if(const std::vector<QubitChannel>& channels,
                                      double sample_rate, double rabi_max);

struct MlsPreamble {
  int register_order = 0;
  std::uint32_t feedback_taps = 0;  // bit i set <=> tap at stage i + 1
  std::vector<int> chips;           // +-1
  int samples_per_chip = 1;

  std::size_t length_samples() const noexcept {
    return chips.size() * static_cast<std::size_t>(samples_per_chip);
  }
};

/// Taps of a primitive feedback polynomial for register orders 2..20.
std::uint32_t primitive_taps(int register_order);

/// Maximum length sequence from a Fibonacci LFSR with the built-in taps.
MlsPreamble generate_mls(int register_order, std::uint32_t seed_state, int samples_per_chip = 2);
/// Same with caller supplied taps; throws ParameterError unless they give a
/// period of 2^m - 1.
MlsPreamble generate_mls(int register_order, std::uint32_t seed_state, std::uint32_t taps,
                         int samples_per_chip);

struct PreambledSignal {
  ComplexSignal signal;
  std::size_t preamble_len = 0;
};

/// [preamble chips held for samples_per_chip samples, scaled by amplitude] ++ signal.
PreambledSignal prepend_preamble(const ComplexSignal& signal, const MlsPreamble& preamble,
                                 double amplitude);

}  // namespace qdpd
