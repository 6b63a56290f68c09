#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/qubit_sim.hpp"
#include "qdpd/signal_gen.hpp"

using namespace qdpd;
constexpr double kPi = std::numbers::pi;

namespace {

// Independent Galois-free check: period of the Fibonacci LFSR defined by the
// tap mask, stepping until the state repeats.
std::size_t lfsr_period(int m, std::uint32_t taps) {
  const std::uint32_t mask = (1u << m) - 1u;
  const std::uint32_t start = 1;
  std::uint32_t s = start;
  std::size_t steps = 0;
  do {
    const std::uint32_t fb = static_cast<std::uint32_t>(__builtin_popcount(s & taps) & 1);
    s = ((s << 1) | fb) & mask;
    ++steps;
  } while (s != start && steps <= mask + 1u);
  return steps;
}

Matrix2 block_unitary(const QubitChannel& ch, std::size_t block) {
  Matrix2 u = Matrix2::identity();
  for (std::size_t g = 0; g < 4; ++g) {
    const auto& p = ch.gates[block * 4 + g];
    if (is_pi_gate(p.kind)) u = drive_rotation(p.phase, kPi) * u;
  }
  return u;
}

}  // namespace

TEST(GatePhase, Table) {
  EXPECT_EQ(gate_phase(GateKind::XpiPlus), 0.0);
  EXPECT_NEAR(gate_phase(GateKind::YpiPlus), kPi / 2, 1e-15);
  EXPECT_NEAR(gate_phase(GateKind::XpiMinus), kPi, 1e-15);
  EXPECT_NEAR(gate_phase(GateKind::YpiMinus), 3 * kPi / 2, 1e-15);
  EXPECT_EQ(inverse_gate(GateKind::XpiPlus), GateKind::XpiMinus);
  EXPECT_EQ(inverse_gate(GateKind::YpiMinus), GateKind::YpiPlus);
}

TEST(PrimitiveTaps, FullPeriodForEveryOrder) {
  for (int m = 2; m <= 20; ++m) {
    const std::size_t period = (std::size_t{1} << m) - 1;
    EXPECT_EQ(lfsr_period(m, primitive_taps(m)), period) << "m=" << m;
  }
}

TEST(Mls, TwoValuedCircularAutocorrelation) {
  for (int m : {3, 5, 10}) {
    const auto mls = generate_mls(m, 1, 1);
    const std::size_t n = mls.chips.size();
    ASSERT_EQ(n, (std::size_t{1} << m) - 1);
    for (std::size_t lag = 0; lag < n; ++lag) {
      long acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += mls.chips[i] * mls.chips[(i + lag) % n];
      EXPECT_EQ(acc, lag == 0 ? static_cast<long>(n) : -1) << "m=" << m << " lag=" << lag;
    }
  }
}

TEST(Mls, BalanceAndSamplesPerChip) {
  const auto mls = generate_mls(10, 0x2a, 2);
  long sum = 0;
  for (int c : mls.chips) sum += c;
  EXPECT_EQ(std::abs(sum), 1);
  EXPECT_EQ(mls.length_samples(), 2046u);
  EXPECT_THROW(generate_mls(10, 0, 2), ParameterError);
  EXPECT_THROW(generate_mls(4, 1, 0b0011u, 1), ParameterError);  // missing last stage
  EXPECT_THROW(generate_mls(4, 1, 0b1000u, 1), ParameterError);  // not maximal
}

TEST(GateSequence, InversePairBlocksAreIdentity) {
  SequenceOptions o;
  o.rng_seed = 11;
  o.n_sequences = 40;
  const auto channels = build_gate_sequence(o);
  ASSERT_EQ(channels.size(), 4u);
  for (const auto& ch : channels) {
    ASSERT_EQ(ch.gates.size(), 160u);
    for (std::size_t b = 0; b < 40; ++b) {
      int active = 0;
      for (std::size_t g = 0; g < 4; ++g) active += is_pi_gate(ch.gates[b * 4 + g].kind);
      EXPECT_EQ(active, 2);
      const auto u = block_unitary(ch, b);
      // Identity up to a global phase.
      EXPECT_NEAR(std::norm(u(0, 0)), 1.0, 1e-12);
      EXPECT_NEAR(std::abs(u(0, 1)), 0.0, 1e-12);
    }
  }
}

TEST(GateSequence, IndependentRuleReachesExemplaryPattern) {
  SequenceOptions o;
  o.block_rule = BlockRule::IndependentPi;
  o.n_sequences = 200;
  std::set<std::pair<GateKind, GateKind>> pairs;
  for (const auto& ch : build_gate_sequence(o)) {
    for (std::size_t b = 0; b < 200; ++b) {
      std::vector<GateKind> pi;
      for (std::size_t g = 0; g < 4; ++g) {
        if (is_pi_gate(ch.gates[b * 4 + g].kind)) pi.push_back(ch.gates[b * 4 + g].kind);
      }
      ASSERT_EQ(pi.size(), 2u);
      pairs.insert({pi[0], pi[1]});
    }
  }
  EXPECT_EQ(pairs.size(), 16u);
  EXPECT_TRUE(pairs.count({GateKind::YpiPlus, GateKind::XpiMinus}));
}

TEST(GateSequence, DeterministicAndTimed) {
  const auto a = build_gate_sequence(5, 2, 3, 1e-6);
  const auto b = build_gate_sequence(5, 2, 3, 1e-6);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t q = 0; q < a.size(); ++q) {
    for (std::size_t i = 0; i < a[q].gates.size(); ++i) {
      EXPECT_EQ(a[q].gates[i].kind, b[q].gates[i].kind);
      EXPECT_DOUBLE_EQ(a[q].gates[i].start_time, 1e-6 * i);
    }
  }
  EXPECT_DOUBLE_EQ(a[1].freq_offset, 30e6);
  EXPECT_DOUBLE_EQ(a[0].duration(), 12e-6);
}

TEST(Baseband, PiPulseRotationIsChecked) {
  auto ch = build_gate_sequence(1, 1, 1, 1e-6)[0];
  const double rabi = kPi / 1e-6;
  const auto bb = baseband_of_channel(ch, 100e6, rabi);
  EXPECT_EQ(bb.size(), 400u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& g = ch.gates[i];
    const cplx v = bb[i * 100 + 50];
    EXPECT_EQ(v, is_pi_gate(g.kind) ? std::polar(1.0, g.phase) : cplx{});
  }
  EXPECT_THROW(baseband_of_channel(ch, 100e6, 0.9 * rabi), ParameterError);
  EXPECT_THROW(baseband_of_channel(ch, 1.5e6, rabi), ResolutionError);
}

TEST(Multitone, TonesSitAtTheirOffsets) {
  SequenceOptions o;
  o.n_sequences = 4;
  o.pulse_duration = 1.6e-6;
  const auto channels = build_gate_sequence(o);
  const double fs = 250e6;
  const auto mt = assemble_multitone_if(channels, fs, kPi / 1.6e-6);
  ASSERT_EQ(mt.tone_power_db.size(), 4u);
  for (double p : mt.tone_power_db) EXPECT_NEAR(p, 0.0, 1e-12);
  for (const auto& ch : channels) {
    const auto bb = baseband_of_channel(ch, fs, kPi / 1.6e-6);
    const auto rx = dsp::extract_tone(mt.signal, ch.freq_offset, 4e6, 4e6);
    // Mid-pulse samples match the programmed envelope up to leakage of the
    // filter transients.
    for (std::size_t g = 0; g < ch.gates.size(); ++g) {
      const std::size_t mid = g * 400 + 200;
      EXPECT_LT(std::abs(rx[mid] - bb[mid]), 0.05) << "q" << ch.qubit_id << " g" << g;
    }
  }
}

TEST(Multitone, RejectsAliasingAndMismatch) {
  auto channels = build_gate_sequence(1, 2, 1, 1e-6);
  channels[1].freq_offset = 60e6;
  EXPECT_THROW(assemble_multitone_if(channels, 100e6, kPi / 1e-6), ParameterError);
  auto short_one = build_gate_sequence(1, 2, 1, 1e-6);
  short_one[1].gates.pop_back();
  EXPECT_THROW(assemble_multitone_if(short_one, 100e6, kPi / 1e-6), ParameterError);
}

TEST(Preamble, PrependsChips) {
  const auto mls = generate_mls(5, 1, 2);
  const ComplexSignal payload(std::vector<cplx>{cplx{9.0}}, 10.0);
  const auto p = prepend_preamble(payload, mls, 0.5);
  ASSERT_EQ(p.preamble_len, 62u);
  ASSERT_EQ(p.signal.size(), 63u);
  for (std::size_t i = 0; i < 62; ++i) EXPECT_EQ(p.signal[i], cplx(0.5 * mls.chips[i / 2]));
  EXPECT_EQ(p.signal[62], cplx(9.0));
}
