#include "qdpd/signal_gen.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "qdpd/errors.hpp"

namespace qdpd {
namespace {

constexpr double kPi = std::numbers::pi;

// Raw engine output modulo n. Keeps sequences identical across standard
// libraries, unlike the std distributions; the bias is below 2^-60.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

constexpr std::array<GateKind, 4> kPiGates = {GateKind::XpiPlus, GateKind::XpiMinus,
                                              GateKind::YpiPlus, GateKind::YpiMinus};

// All six placements of two pi pulses (true) among four slots.
constexpr std::array<std::array<bool, 4>, 6> kBlockPatterns = {{
    {true, true, false, false},
    {true, false, true, false},
    {true, false, false, true},
    {false, true, true, false},
    {false, true, false, true},
    {false, false, true, true},
}};

std::size_t sample_index(double t, double sample_rate) {
  return static_cast<std::size_t>(std::llround(t * sample_rate));
}

}  // namespace

double gate_phase(GateKind kind) {
  switch (kind) {
    case GateKind::XpiPlus: return 0.0;
    case GateKind::YpiPlus: return 0.5 * kPi;
    case GateKind::XpiMinus: return kPi;
    case GateKind::YpiMinus: return 1.5 * kPi;
    case GateKind::Idle: return 0.0;
  }
  return 0.0;
}

GateKind inverse_gate(GateKind kind) {
  switch (kind) {
    case GateKind::XpiPlus: return GateKind::XpiMinus;
    case GateKind::XpiMinus: return GateKind::XpiPlus;
    case GateKind::YpiPlus: return GateKind::YpiMinus;
    case GateKind::YpiMinus: return GateKind::YpiPlus;
    case GateKind::Idle: return GateKind::Idle;
  }
  return GateKind::Idle;
}

bool is_pi_gate(GateKind kind) { return kind != GateKind::Idle; }

const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::XpiPlus: return "X_pi";
    case GateKind::XpiMinus: return "-X_pi";
    case GateKind::YpiPlus: return "Y_pi";
    case GateKind::YpiMinus: return "-Y_pi";
    case GateKind::Idle: return "idle";
  }
  return "?";
}

void QubitChannel::validate() const {
  double t = gates.empty() ? 0.0 : gates.front().start_time;
  for (const auto& g : gates) {
    if (!(g.duration > 0.0)) throw ParameterError("gate duration must be positive");
    if (g.amplitude < 0.0) throw ParameterError("gate amplitude must be non-negative");
    if ((g.kind == GateKind::Idle) != (g.amplitude == 0.0)) {
      throw ParameterError("idle gates must have zero amplitude and only idle gates may");
    }
    if (g.phase < 0.0 || g.phase >= 2.0 * kPi) throw ParameterError("gate phase outside [0, 2pi)");
    if (std::abs(g.start_time - t) > 1e-12 * std::max(1.0, std::abs(t)) + 1e-18) {
      throw ParameterError("gates of qubit " + std::to_string(qubit_id) + " are not contiguous");
    }
    t = g.end_time();
  }
}

std::vector<double> default_tone_offsets(int n_qubits) {
  std::vector<double> out;
  for (int q = 0; q < n_qubits; ++q) out.push_back(20e6 + 10e6 * q);
  return out;
}

std::vector<QubitChannel> build_gate_sequence(const SequenceOptions& o) {
  if (o.n_qubits < 1) throw ParameterError("n_qubits must be >= 1");
  if (o.n_sequences < 1) throw ParameterError("n_sequences must be >= 1");
  if (!(o.pulse_duration > 0.0)) throw ParameterError("pulse_duration must be positive");
  if (!(o.pi_amplitude > 0.0)) throw ParameterError("pi_amplitude must be positive");
  const auto offsets = o.freq_offsets.empty() ? default_tone_offsets(o.n_qubits) : o.freq_offsets;
  if (offsets.size() != static_cast<std::size_t>(o.n_qubits)) {
    throw ParameterError("need one frequency offset per qubit");
  }

  std::mt19937_64 rng(o.rng_seed);
  std::vector<QubitChannel> channels;
  for (int q = 0; q < o.n_qubits; ++q) {
    QubitChannel ch;
    ch.qubit_id = q;
    ch.freq_offset = offsets[static_cast<std::size_t>(q)];
    std::size_t slot = 0;
    for (int s = 0; s < o.n_sequences; ++s) {
      const auto& pattern = kBlockPatterns[draw(rng, kBlockPatterns.size())];
      const GateKind first = kPiGates[draw(rng, kPiGates.size())];
      const GateKind second = o.block_rule == BlockRule::InversePair
                                  ? inverse_gate(first)
                                  : kPiGates[draw(rng, kPiGates.size())];
      bool first_used = false;
      for (bool active : pattern) {
        GatePulse p;
        p.kind = active ? (first_used ? second : first) : GateKind::Idle;
        first_used |= active;
        p.amplitude = active ? o.pi_amplitude : 0.0;
        p.phase = gate_phase(p.kind);
        p.duration = o.pulse_duration;
        p.start_time = static_cast<double>(slot++) * o.pulse_duration;
        ch.gates.push_back(p);
      }
    }
    channels.push_back(std::move(ch));
  }
  return channels;
}

std::vector<QubitChannel> build_gate_sequence(std::uint64_t rng_seed, int n_qubits,
                                              int n_sequences, double pulse_duration) {
  SequenceOptions o;
  o.rng_seed = rng_seed;
  o.n_qubits = n_qubits;
  o.n_sequences = n_sequences;
  o.pulse_duration = pulse_duration;
  return build_gate_sequence(o);
}

ComplexSignal baseband_of_channel(const QubitChannel& channel, double sample_rate,
                                  double rabi_max) {
  if (!(sample_rate > 0.0)) throw ParameterError("sample_rate must be positive");
  if (!(rabi_max > 0.0)) throw ParameterError("rabi_max must be positive");
  channel.validate();

  ComplexSignal out(sample_index(channel.duration(), sample_rate), sample_rate);
  for (const auto& g : channel.gates) {
    if (g.duration * sample_rate < 2.0) {
      throw ResolutionError("pulse of " + std::to_string(g.duration) +
                            " s is shorter than two samples");
    }
    if (is_pi_gate(g.kind)) {
      const double theta = rabi_max * g.amplitude * g.duration;
      if (std::abs(theta - kPi) > 1e-9 * kPi) {
        throw ParameterError("pi pulse realises a rotation of " + std::to_string(theta) +
                             " rad, not pi");
      }
    }
    if (g.amplitude == 0.0) continue;
    const std::size_t begin = sample_index(g.start_time, sample_rate);
    const std::size_t end = std::min(sample_index(g.end_time(), sample_rate), out.size());
    const cplx value = std::polar(g.amplitude, g.phase);
    for (std::size_t i = begin; i < end; ++i) out[i] = value;
  }
  return out;
}

MultitoneSignal assemble_multitone_if(const std::vector<QubitChannel>& channels,
                                      double sample_rate, double rabi_max) {
  if (channels.empty()) throw ParameterError("no channels to assemble");
  MultitoneSignal result;
  std::size_t length = 0;
  for (const auto& ch : channels) {
    if (std::abs(ch.freq_offset) >= 0.5 * sample_rate) {
      throw ParameterError("tone offset " + std::to_string(ch.freq_offset) +
                           " Hz aliases at the sample rate");
    }
    const auto n = sample_index(ch.duration(), sample_rate);
    if (length == 0) length = n;
    if (n != length) throw ParameterError("channels must share a common duration");
  }
  result.signal = ComplexSignal(length, sample_rate);
  auto out = result.signal.samples();
  for (const auto& ch : channels) {
    const auto bb = baseband_of_channel(ch, sample_rate, rabi_max);
    double active_power = 0.0;
    std::size_t active = 0;
    const double cycles_per_sample = ch.freq_offset / sample_rate;
    for (std::size_t i = 0; i < length; ++i) {
      if (bb[i] == cplx{}) continue;
      const double cycles = std::fmod(cycles_per_sample * static_cast<double>(i), 1.0);
      out[i] += bb[i] * std::polar(1.0, 2.0 * kPi * cycles);
      active_power += std::norm(bb[i]);
      ++active;
    }
    result.tone_power_db.push_back(
        active ? 10.0 * std::log10(active_power / static_cast<double>(active))
               : -std::numeric_limits<double>::infinity());
  }
  return result;
}

std::uint32_t primitive_taps(int m) {
  // Feedback taps (1-based stage numbers) of primitive trinomials/pentanomials.
  static const std::array<std::vector<int>, 21> table = {{
      {}, {}, {2, 1}, {3, 2}, {4, 3}, {5, 3}, {6, 5}, {7, 6}, {8, 6, 5, 4}, {9, 5}, {10, 7},
      {11, 9}, {12, 6, 4, 1}, {13, 4, 3, 1}, {14, 5, 3, 1}, {15, 14}, {16, 15, 13, 4},
      {17, 14}, {18, 11}, {19, 6, 2, 1}, {20, 17},
  }};
  if (m < 2 || m > 20) throw ParameterError("register order must be in [2, 20]");
  std::uint32_t mask = 0;
  for (int stage : table[static_cast<std::size_t>(m)]) mask |= 1u << (stage - 1);
  return mask;
}

MlsPreamble generate_mls(int register_order, std::uint32_t seed_state, int samples_per_chip) {
  return generate_mls(register_order, seed_state, primitive_taps(register_order),
                      samples_per_chip);
}

MlsPreamble generate_mls(int m, std::uint32_t seed_state, std::uint32_t taps,
                         int samples_per_chip) {
  if (m < 2 || m > 24) throw ParameterError("register order must be in [2, 24]");
  if (samples_per_chip < 1) throw ParameterError("samples_per_chip must be >= 1");
  const std::uint32_t mask = (1u << m) - 1u;
  const std::uint32_t start = seed_state & mask;
  if (start == 0) throw ParameterError("LFSR seed must be nonzero");
  if ((taps & ~mask) != 0 || (taps & (1u << (m - 1))) == 0) {
    throw ParameterError("taps must include the last stage and stay within the register");
  }

  const std::size_t period = (std::size_t{1} << m) - 1;
  MlsPreamble p;
  p.register_order = m;
  p.feedback_taps = taps;
  p.samples_per_chip = samples_per_chip;
  p.chips.reserve(period);
  std::uint32_t state = start;
  for (std::size_t i = 0; i < period; ++i) {
    const int bit = static_cast<int>((state >> (m - 1)) & 1u);
    p.chips.push_back(bit ? -1 : 1);
    const std::uint32_t feedback = static_cast<std::uint32_t>(std::popcount(state & taps) & 1);
    state = ((state << 1) | feedback) & mask;
    if (state == start && i + 1 < period) {
      throw ParameterError("feedback taps are not primitive: period " + std::to_string(i + 1));
    }
  }
  if (state != start) throw ParameterError("feedback taps are not primitive");
  return p;
}

PreambledSignal prepend_preamble(const ComplexSignal& signal, const MlsPreamble& preamble,
                                 double amplitude) {
  if (preamble.samples_per_chip < 1) throw ParameterError("samples_per_chip must be >= 1");
  std::vector<cplx> out;
  out.reserve(preamble.length_samples() + signal.size());
  for (int chip : preamble.chips) {
    out.insert(out.end(), static_cast<std::size_t>(preamble.samples_per_chip),
               cplx(amplitude * chip, 0.0));
  }
  const std::size_t preamble_len = out.size();
  out.insert(out.end(), signal.samples().begin(), signal.samples().end());
  return {ComplexSignal(std::move(out), signal.sample_rate()), preamble_len};
}

}  // namespace qdpd
