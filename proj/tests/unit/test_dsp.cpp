#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qdpd/dsp.hpp"

using namespace qdpd;
constexpr double kPi = std::numbers::pi;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> X(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      X[k] += x[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>((k * i) % n) / n);
    }
  }
  return X;
}

std::vector<cplx> random_signal(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  std::vector<cplx> x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  return x;
}

double max_err(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n : {1u, 2u, 7u, 64u, 100u, 243u}) {
    const auto x = random_signal(n, static_cast<unsigned>(n));
    EXPECT_LT(max_err(dsp::fft(x), naive_dft(x)), 1e-10 * n) << n;
    EXPECT_LT(max_err(dsp::ifft(dsp::fft(x)), x), 1e-12) << n;
  }
}

TEST(SignedBin, Layout) {
  EXPECT_EQ(dsp::signed_bin(0, 8), 0);
  EXPECT_EQ(dsp::signed_bin(3, 8), 3);
  EXPECT_EQ(dsp::signed_bin(4, 8), -4);
  EXPECT_EQ(dsp::signed_bin(7, 8), -1);
  EXPECT_EQ(dsp::signed_bin(4, 9), 4);
  EXPECT_EQ(dsp::signed_bin(5, 9), -4);
}

TEST(FractionalDelay, IntegerDelayIsCircularShift) {
  const auto x = random_signal(50, 3);
  const auto y = dsp::fractional_delay(x, 3.0);
  std::vector<cplx> expect(50);
  for (std::size_t i = 0; i < 50; ++i) expect[(i + 3) % 50] = x[i];
  // Nyquist bin of an even length is split, so compare with a tolerance that
  // reflects only that bin's contribution.
  const auto odd = random_signal(51, 4);
  const auto yo = dsp::fractional_delay(odd, -5.0);
  std::vector<cplx> expect_odd(51);
  for (std::size_t i = 0; i < 51; ++i) expect_odd[i] = odd[(i + 5) % 51];
  EXPECT_LT(max_err(yo, expect_odd), 1e-12);
  EXPECT_LT(max_err(y, expect), 1e-12);
}

TEST(FractionalDelay, BandlimitedToneShiftsExactly) {
  const std::size_t n = 128;
  const double k0 = 9.0, d = 2.37;
  std::vector<cplx> x(n), expect(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::polar(1.0, 2.0 * kPi * k0 * i / n);
    expect[i] = std::polar(1.0, 2.0 * kPi * k0 * (i - d) / n);
  }
  EXPECT_LT(max_err(dsp::fractional_delay(x, d), expect), 1e-12);
}

TEST(Upsample, InterpolatesBandlimitedTone) {
  const std::size_t n = 64;
  const int factor = 10;
  std::vector<cplx> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(0.7, -2.0 * kPi * 5.0 * i / n + 0.2);
  const auto y = dsp::upsample(x, factor);
  ASSERT_EQ(y.size(), n * factor);
  double err = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double t = static_cast<double>(j) / factor;
    err = std::max(err, std::abs(y[j] - std::polar(0.7, -2.0 * kPi * 5.0 * t / n + 0.2)));
  }
  EXPECT_LT(err, 1e-12);
  EXPECT_THROW(dsp::upsample(x, 0), std::exception);
}

TEST(LsGain, RecoversScale) {
  const auto x = random_signal(200, 9);
  std::vector<cplx> y(x.size());
  const cplx g{-1.25, 0.5};
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = g * x[i];
  EXPECT_LT(std::abs(dsp::ls_gain(y, x) - g), 1e-14);
  EXPECT_EQ(dsp::ls_gain(y, std::vector<cplx>(x.size())), cplx{});
}

TEST(Mix, ShiftsToneToDc) {
  const double fs = 100.0, f = 12.5;
  std::vector<cplx> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::polar(2.0, 2.0 * kPi * f * i / fs + 0.4);
  const auto y = dsp::mix(x, f, fs);
  for (const auto& v : y) EXPECT_LT(std::abs(v - std::polar(2.0, 0.4)), 1e-9);
}

TEST(Lowpass, ResponseShape) {
  EXPECT_EQ(dsp::lowpass_response(0.0, 4.0, 4.0), 1.0);
  EXPECT_EQ(dsp::lowpass_response(2.0, 4.0, 4.0), 1.0);
  EXPECT_NEAR(dsp::lowpass_response(4.0, 4.0, 4.0), 0.5, 1e-15);
  EXPECT_NEAR(dsp::lowpass_response(-4.0, 4.0, 4.0), 0.5, 1e-15);
  EXPECT_EQ(dsp::lowpass_response(6.0, 4.0, 4.0), 0.0);
  EXPECT_EQ(dsp::lowpass_response(10.0, 4.0, 4.0), 0.0);
}

TEST(Lowpass, PassbandToneUnchangedStopbandToneRemoved) {
  const double fs = 250e6;
  const std::size_t n = 20000;
  std::vector<cplx> pass(n), stop(n);
  for (std::size_t i = 0; i < n; ++i) {
    pass[i] = std::polar(1.0, 2.0 * kPi * 1e6 * i / fs);
    stop[i] = std::polar(1.0, 2.0 * kPi * 10e6 * i / fs);
  }
  const auto yp = dsp::lowpass(pass, fs, 4e6, 4e6);
  const auto ys = dsp::lowpass(stop, fs, 4e6, 4e6);
  // Away from the edges (filter settles within a few microseconds).
  double ep = 0.0, es = 0.0;
  for (std::size_t i = 5000; i < n - 5000; ++i) {
    ep = std::max(ep, std::abs(yp[i] - pass[i]));
    es = std::max(es, std::abs(ys[i]));
  }
  EXPECT_LT(ep, 1e-3);
  EXPECT_LT(20.0 * std::log10(es), -60.0);
}
