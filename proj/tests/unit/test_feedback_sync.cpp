#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/feedback_sync.hpp"
#include "qdpd/signal_gen.hpp"

using namespace qdpd;

namespace {

// Preamble followed by a smooth band-limited payload.
PreambledSignal test_frame(std::size_t payload_len = 3000) {
  std::vector<cplx> payload(payload_len);
  for (std::size_t i = 0; i < payload_len; ++i) {
    const double t = static_cast<double>(i);
    payload[i] = 0.3 * std::polar(1.0, 0.05 * t) + 0.2 * std::polar(1.0, -0.11 * t + 1.0);
  }
  return prepend_preamble(ComplexSignal(std::move(payload), 250e6), generate_mls(10, 1, 2), 0.5);
}

ComplexSignal impair(const ComplexSignal& s, double delay, cplx gain) {
  auto v = dsp::fractional_delay(s.samples(), delay);
  for (auto& x : v) x *= gain;
  return ComplexSignal(std::move(v), s.sample_rate());
}

}  // namespace

TEST(EstimateAlignment, IdentityCopy) {
  const auto f = test_frame();
  const auto r = estimate_alignment(f.signal, f.signal, 10, f.preamble_len);
  EXPECT_EQ(r.delay_samples, 0.0);
  EXPECT_LT(std::abs(r.complex_gain - cplx{1.0}), 1e-12);
  EXPECT_GT(r.peak_metric, 6.0);
}

TEST(EstimateAlignment, FractionalDelayGrid) {
  const auto f = test_frame();
  const cplx gain = std::polar(0.37, 2.1);
  for (int i = 0; i < 100; ++i) {
    const double d = 0.1 * i;
    const auto rx = impair(f.signal, d, gain);
    const auto r = estimate_alignment(f.signal, rx, 10, f.preamble_len);
    EXPECT_NEAR(r.delay_samples, d, 0.05) << d;
    EXPECT_LT(std::abs(r.complex_gain - gain), 1e-6) << d;
  }
}

TEST(EstimateAlignment, OffGridDelayWithinHalfResolution) {
  const auto f = test_frame();
  const auto rx = impair(f.signal, 3.73, cplx{1.0});
  const auto r = estimate_alignment(f.signal, rx, 10, f.preamble_len);
  EXPECT_NEAR(r.delay_samples, 3.73, 0.05 + 1e-9);
}

TEST(EstimateAlignment, NegativeDelay) {
  const auto f = test_frame();
  const auto rx = impair(f.signal, -2.4, cplx{1.0});
  EXPECT_NEAR(estimate_alignment(f.signal, rx, 10, f.preamble_len).delay_samples, -2.4, 0.05);
}

TEST(EstimateAlignment, NoiseOnlyFails) {
  const auto f = test_frame();
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  std::vector<cplx> noise(f.signal.size());
  for (auto& v : noise) v = {g(rng), g(rng)};
  SyncOptions o;
  o.preamble_len = f.preamble_len;
  o.min_peak_db = 6.0;
  EXPECT_THROW(estimate_alignment(f.signal, ComplexSignal(noise, 250e6), o), SyncError);
}

TEST(EstimateAlignment, Preconditions) {
  const auto f = test_frame();
  EXPECT_THROW(estimate_alignment(f.signal, f.signal, 0, f.preamble_len), ParameterError);
  EXPECT_THROW(estimate_alignment(f.signal, ComplexSignal(std::vector<cplx>(10), 250e6), 10,
                                  f.preamble_len),
               ParameterError);
  EXPECT_THROW(estimate_alignment(f.signal, ComplexSignal(f.signal.data(), 100e6), 10,
                                  f.preamble_len),
               ParameterError);
}

TEST(AlignAndStrip, IdentityPassthrough) {
  const auto f = test_frame(100);
  const auto out = align_and_strip(f.signal, SyncResult{}, f.preamble_len);
  ASSERT_EQ(out.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(out[i], f.signal[f.preamble_len + i]);
}

TEST(AlignAndStrip, RoundTripRecoversPayload) {
  const auto f = test_frame();
  const cplx gain = std::polar(2.0, std::numbers::pi / 4);
  const auto rx = impair(f.signal, 4.0, gain);
  const auto sync = estimate_alignment(f.signal, rx, 10, f.preamble_len);
  const auto out = align_and_strip(rx, sync, f.preamble_len, f.signal.size() - f.preamble_len);
  double err = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    err = std::max(err, std::abs(out[i] - f.signal[f.preamble_len + i]));
  }
  EXPECT_LT(err, 1e-6);
}

TEST(AlignAndStrip, LengthMismatch) {
  const auto f = test_frame(100);
  EXPECT_THROW(align_and_strip(f.signal, SyncResult{}, f.preamble_len, 99), ParameterError);
  EXPECT_THROW(align_and_strip(f.signal, SyncResult{}, f.signal.size()), ParameterError);
}
