#include "qdpd/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "qdpd/errors.hpp"

namespace qdpd::dsp {
namespace {

// FFTW's planner is not thread safe; execution of an existing plan on new
// arrays is. Plans are cached per (length, direction) for the process life.
class PlanCache {
 public:
  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
    fftw_free(buf);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

std::vector<cplx> transform(std::span<const cplx> x, int sign) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  FftwBuffer buf(n);
  auto* io = reinterpret_cast<cplx*>(buf.data);
  std::copy(x.begin(), x.end(), io);
  fftw_execute_dft(plan_cache().get(static_cast<int>(n), sign), buf.data, buf.data);
  return std::vector<cplx>(io, io + n);
}

}  // namespace

std::vector<cplx> fft(std::span<const cplx> x) { return transform(x, FFTW_FORWARD); }

std::vector<cplx> ifft(std::span<const cplx> X) {
  auto x = transform(X, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v *= inv;
  return x;
}

std::vector<cplx> fractional_delay(std::span<const cplx> x, double delay) {
  const std::size_t n = x.size();
  if (n == 0 || delay == 0.0) return {x.begin(), x.end()};
  auto X = fft(x);
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(signed_bin(k, n)) * delay /
                         static_cast<double>(n);
    X[k] *= std::polar(1.0, phase);
  }
  return ifft(X);
}

std::vector<cplx> upsample(std::span<const cplx> x, int factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  const std::size_t n = x.size();
  if (factor == 1 || n == 0) return {x.begin(), x.end()};
  const std::size_t m = n * static_cast<std::size_t>(factor);
  auto X = fft(x);
  std::vector<cplx> Y(m);
  for (std::size_t k = 0; k < n; ++k) {
    const long b = signed_bin(k, n);
    const std::size_t dst = b >= 0 ? static_cast<std::size_t>(b) : m - static_cast<std::size_t>(-b);
    Y[dst] = X[k];
  }
  auto y = ifft(Y);
  for (auto& v : y) v *= static_cast<double>(factor);
  return y;
}

cplx ls_gain(std::span<const cplx> y, std::span<const cplx> x) {
  const std::size_t n = std::min(x.size(), y.size());
  cplx num{};
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += y[i] * std::conj(x[i]);
    den += std::norm(x[i]);
  }
  return den > 0.0 ? num / den : cplx{};
}

std::vector<cplx> mix(std::span<const cplx> x, double freq, double sample_rate) {
  std::vector<cplx> out(x.size());
  const double w = -2.0 * std::numbers::pi * freq / sample_rate;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Phase from the integer index keeps long signals free of accumulated drift.
    out[i] = x[i] * std::polar(1.0, std::fmod(w * static_cast<double>(i), 2.0 * std::numbers::pi));
  }
  return out;
}

double lowpass_response(double f, double bandwidth, double transition) {
  const double edge = 0.5 * bandwidth;
  const double af = std::abs(f);
  if (af <= edge) return 1.0;
  if (transition <= 0.0 || af >= edge + transition) return 0.0;
  const double u = (af - edge) / transition;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

std::vector<cplx> lowpass(std::span<const cplx> x, double sample_rate, double bandwidth,
                          double transition) {
  if (x.empty()) return {};
  if (!(bandwidth > 0.0)) throw ParameterError("lowpass bandwidth must be positive");
  // Impulse response decays within a few 1/transition; pad generously.
  const double settle = transition > 0.0 ? 16.0 * sample_rate / transition : 4096.0;
  const std::size_t guard = static_cast<std::size_t>(std::ceil(std::min(settle, 65536.0)));
  std::vector<cplx> padded(x.size() + 2 * guard);
  std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(guard));
  auto X = fft(padded);
  const std::size_t n = X.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(signed_bin(k, n)) * sample_rate / static_cast<double>(n);
    X[k] *= lowpass_response(f, bandwidth, transition);
  }
  auto y = ifft(X);
  return std::vector<cplx>(y.begin() + static_cast<std::ptrdiff_t>(guard),
                           y.begin() + static_cast<std::ptrdiff_t>(guard + x.size()));
}

ComplexSignal extract_tone(const ComplexSignal& x, double freq, double bandwidth,
                           double transition) {
  auto mixed = mix(x.samples(), freq, x.sample_rate());
  return ComplexSignal(lowpass(mixed, x.sample_rate(), bandwidth, transition), x.sample_rate());
}

}  // namespace qdpd::dsp
