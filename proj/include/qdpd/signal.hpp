#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qdpd {

using cplx = std::complex<double>;

/// Uniformly sampled complex waveform. The carrier for every baseband and IF
/// signal in the chain.
class ComplexSignal {
 public:
  ComplexSignal() = default;
  ComplexSignal(std::vector<cplx> samples, double sample_rate);
  /// Zero signal of `length` samples.
  ComplexSignal(std::size_t length, double sample_rate);

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double sample_rate() const noexcept { return sample_rate_; }
  double duration() const noexcept { return static_cast<double>(size()) / sample_rate_; }

  std::span<const cplx> samples() const noexcept { return samples_; }
  std::span<cplx> samples() noexcept { return samples_; }
  std::vector<cplx>& data() noexcept { return samples_; }
  const std::vector<cplx>& data() const noexcept { return samples_; }

  cplx operator[](std::size_t i) const { return samples_[i]; }
  cplx& operator[](std::size_t i) { return samples_[i]; }

  /// Sub-signal [begin, begin + count).
  ComplexSignal slice(std::size_t begin, std::size_t count) const;

  ComplexSignal& operator*=(cplx scale);
  friend ComplexSignal operator*(ComplexSignal s, cplx scale) { return s *= scale; }

  /// Sum of |x|^2.
  double energy() const noexcept;
  /// Mean of |x|^2.
  double mean_power() const noexcept;

  bool operator==(const ComplexSignal&) const = default;

 private:
  std::vector<cplx> samples_;
  double sample_rate_ = 1.0;
};

// Binary container, little endian:
//   u32 magic, u32 version, f64 sample_rate, u64 length, length x (f64 re, f64 im)
inline constexpr std::uint32_t kSignalMagic = 0x47495351;  // "QSIG"
inline constexpr std::uint32_t kSignalVersion = 1;

void write_signal_binary(std::ostream& out, const ComplexSignal& signal);
ComplexSignal read_signal_binary(std::istream& in);
void save_signal_binary(const std::string& path, const ComplexSignal& signal);
ComplexSignal load_signal_binary(const std::string& path);

/// CSV with header `index,re,im`.
void write_signal_csv(std::ostream& out, const ComplexSignal& signal);

}  // namespace qdpd
