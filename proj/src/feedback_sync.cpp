#include "qdpd/feedback_sync.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {

SyncResult estimate_alignment(const ComplexSignal& reference, const ComplexSignal& received,
                              const SyncOptions& options) {
  const std::size_t p = options.preamble_len;
  const int factor = options.upsample_factor;
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  if (p == 0) throw ParameterError("preamble length must be positive");
  if (reference.size() < p || received.size() < p) {
    throw ParameterError("signals are shorter than the preamble");
  }
  if (reference.sample_rate() != received.sample_rate()) {
    throw ParameterError("reference and received sample rates differ");
  }

  // Window: the reference preamble zero-padded, against the same span of the
  // received signal plus a margin for positive delays.
  const std::size_t window = std::min(received.size(), p + p / 2);
  std::vector<cplx> ref(window), rx(window);
  std::copy_n(reference.samples().begin(), p, ref.begin());
  std::copy_n(received.samples().begin(), window, rx.begin());

  // Circular cross-correlation c(tau) = sum_n rx(n) conj(ref(n - tau)) evaluated
  // on the 1/factor grid via a zero-padded spectrum.
  const auto R = dsp::fft(ref);
  const auto X = dsp::fft(rx);
  std::vector<cplx> spectrum(window);
  for (std::size_t k = 0; k < window; ++k) spectrum[k] = X[k] * std::conj(R[k]);
  const auto spec_time = dsp::ifft(spectrum);
  const auto corr = dsp::upsample(spec_time, factor);

  const std::size_t m = corr.size();
  std::size_t peak = 0;
  double peak_mag = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mag = std::abs(corr[i]);
    if (mag > peak_mag) {
      peak_mag = mag;
      peak = i;
    }
  }

  // Main lobe: walk outwards while the magnitude keeps falling.
  auto wrap = [m](std::ptrdiff_t i) {
    return static_cast<std::size_t>((i % static_cast<std::ptrdiff_t>(m) + static_cast<std::ptrdiff_t>(m)) %
                                    static_cast<std::ptrdiff_t>(m));
  };
  std::ptrdiff_t right = 0, left = 0;
  const auto half = static_cast<std::ptrdiff_t>(m / 2);
  while (right < half &&
         std::abs(corr[wrap(static_cast<std::ptrdiff_t>(peak) + right + 1)]) <
             std::abs(corr[wrap(static_cast<std::ptrdiff_t>(peak) + right)])) {
    ++right;
  }
  while (left < half &&
         std::abs(corr[wrap(static_cast<std::ptrdiff_t>(peak) - left - 1)]) <
             std::abs(corr[wrap(static_cast<std::ptrdiff_t>(peak) - left)])) {
    ++left;
  }
  double sidelobe = 0.0;
  for (std::ptrdiff_t d = right + 1; d < static_cast<std::ptrdiff_t>(m) - left; ++d) {
    sidelobe = std::max(sidelobe, std::abs(corr[wrap(static_cast<std::ptrdiff_t>(peak) + d)]));
  }

  SyncResult result;
  result.peak_metric = sidelobe > 0.0 ? 20.0 * std::log10(peak_mag / sidelobe) : 300.0;
  if (!(result.peak_metric >= options.min_peak_db)) {
    throw SyncError("correlation peak-to-sidelobe ratio " + std::to_string(result.peak_metric) +
                        " dB is below the " + std::to_string(options.min_peak_db) + " dB floor",
                    result.peak_metric);
  }
  result.delay_samples =
      static_cast<double>(dsp::signed_bin(peak, m)) / static_cast<double>(factor);

  const auto compensated = dsp::fractional_delay(received.samples(), -result.delay_samples);
  result.complex_gain = dsp::ls_gain(std::span(compensated).first(p), reference.samples().first(p));
  if (result.complex_gain == cplx{}) throw SyncError("received preamble has no energy", result.peak_metric);
  return result;
}

SyncResult estimate_alignment(const ComplexSignal& reference, const ComplexSignal& received,
                              int upsample_factor, std::size_t preamble_len) {
  SyncOptions o;
  o.upsample_factor = upsample_factor;
  o.preamble_len = preamble_len;
  return estimate_alignment(reference, received, o);
}

ComplexSignal align_and_strip(const ComplexSignal& received, const SyncResult& sync,
                              std::size_t preamble_len, std::size_t payload_len) {
  if (preamble_len >= received.size()) {
    throw ParameterError("preamble is not shorter than the received signal");
  }
  if (payload_len != 0 && received.size() - preamble_len != payload_len) {
    throw ParameterError("received payload has " + std::to_string(received.size() - preamble_len) +
                         " samples, expected " + std::to_string(payload_len));
  }
  if (sync.complex_gain == cplx{}) throw ParameterError("sync gain is zero");
  auto aligned = dsp::fractional_delay(received.samples(), -sync.delay_samples);
  const cplx inv = 1.0 / sync.complex_gain;
  std::vector<cplx> payload(aligned.begin() + static_cast<std::ptrdiff_t>(preamble_len),
                            aligned.end());
  for (auto& v : payload) v *= inv;
  return ComplexSignal(std::move(payload), received.sample_rate());
}

void write_sync_csv_header(std::ostream& out) { out << "delay,gain_re,gain_im,peak_db\n"; }

void write_sync_csv_row(std::ostream& out, const SyncResult& s) {
  out << fmt_double(s.delay_samples) << ',' << fmt_double(s.complex_gain.real()) << ','
      << fmt_double(s.complex_gain.imag()) << ',' << fmt_double(s.peak_metric) << '\n';
}

}  // namespace qdpd
