#include "qdpd/signal.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {

static_assert(std::endian::native == std::endian::little,
              "binary signal container assumes a little-endian host");

ComplexSignal::ComplexSignal(std::vector<cplx> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (!(sample_rate > 0.0)) throw ParameterError("sample_rate must be positive");
}

ComplexSignal::ComplexSignal(std::size_t length, double sample_rate)
    : ComplexSignal(std::vector<cplx>(length), sample_rate) {}

ComplexSignal ComplexSignal::slice(std::size_t begin, std::size_t count) const {
  if (begin > size() || count > size() - begin) {
    throw ParameterError("slice out of range");
  }
  return ComplexSignal(std::vector<cplx>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                         samples_.begin() + static_cast<std::ptrdiff_t>(begin + count)),
                       sample_rate_);
}

ComplexSignal& ComplexSignal::operator*=(cplx scale) {
  for (auto& v : samples_) v *= scale;
  return *this;
}

double ComplexSignal::energy() const noexcept {
  double e = 0.0;
  for (const auto& v : samples_) e += std::norm(v);
  return e;
}

double ComplexSignal::mean_power() const noexcept {
  return empty() ? 0.0 : energy() / static_cast<double>(size());
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw IoError("truncated signal container");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void write_signal_binary(std::ostream& out, const ComplexSignal& signal) {
  put<std::uint32_t>(out, kSignalMagic);
  put<std::uint32_t>(out, kSignalVersion);
  put<double>(out, signal.sample_rate());
  put<std::uint64_t>(out, signal.size());
  for (const auto& v : signal.samples()) {
    put<double>(out, v.real());
    put<double>(out, v.imag());
  }
  if (!out) throw IoError("failed writing signal container");
}

ComplexSignal read_signal_binary(std::istream& in) {
  if (get<std::uint32_t>(in) != kSignalMagic) throw IoError("bad signal magic");
  if (const auto version = get<std::uint32_t>(in); version != kSignalVersion) {
    throw IoError("unsupported signal container version " + std::to_string(version));
  }
  const double rate = get<double>(in);
  const auto length = get<std::uint64_t>(in);
  std::vector<cplx> samples;
  samples.reserve(length);
  for (std::uint64_t i = 0; i < length; ++i) {
    const double re = get<double>(in);
    const double im = get<double>(in);
    samples.emplace_back(re, im);
  }
  return ComplexSignal(std::move(samples), rate);
}

void save_signal_binary(const std::string& path, const ComplexSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_signal_binary(out, signal);
}

ComplexSignal load_signal_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_signal_binary(in);
}

void write_signal_csv(std::ostream& out, const ComplexSignal& signal) {
  out << "index,re,im\n";
  for (std::size_t i = 0; i < signal.size(); ++i) {
    out << i << ',' << fmt_double(signal[i].real()) << ',' << fmt_double(signal[i].imag()) << '\n';
  }
}

}  // namespace qdpd
