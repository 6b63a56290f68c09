#pragma once

#include <span>
#include <vector>

#include "qdpd/signal.hpp"

namespace qdpd::dsp {

/// Forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N). Any length.
std::vector<cplx> fft(std::span<const cplx> x);
/// Inverse DFT including the 1/N factor.
std::vector<cplx> ifft(std::span<const cplx> X);

/// Signed frequency index of DFT bin k for length n: k for k < n/2, k - n
/// otherwise (the Nyquist bin of an even length maps to -n/2).
inline long signed_bin(std::size_t k, std::size_t n) {
  return k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Circular fractional delay by `delay` samples via a linear phase ramp in
/// the DFT domain. Exact for periodic band-limited signals and self-inverse
/// with -delay.
std::vector<cplx> fractional_delay(std::span<const cplx> x, double delay);

/// Band-limited interpolation by an integer factor: zero-padding of the DFT.
std::vector<cplx> upsample(std::span<const cplx> x, int factor);

/// Complex least-squares scalar fit <y, x> / <x, x> so that y ~ g x.
/// Returns 0 when x has no energy; callers that need an error check first.
cplx ls_gain(std::span<const cplx> y, std::span<const cplx> x);

/// Mixes by exp(-j 2 pi f t) starting at t = 0.
std::vector<cplx> mix(std::span<const cplx> x, double freq, double sample_rate);

/// Zero-phase low-pass with a flat passband |f| <= bandwidth / 2 and a
/// raised-cosine roll-off of `transition` Hz to an exactly zero stopband.
/// The input is zero-padded before the circular DFT filter so that the ends
/// do not wrap into each other.
std::vector<cplx> lowpass(std::span<const cplx> x, double sample_rate, double bandwidth,
                          double transition);

/// Magnitude response of `lowpass` at frequency f.
double lowpass_response(double f, double bandwidth, double transition);

/// Mix to baseband at `freq` and low-pass to `bandwidth`.
ComplexSignal extract_tone(const ComplexSignal& x, double freq, double bandwidth,
                           double transition);

}  // namespace qdpd::dsp
