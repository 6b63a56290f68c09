#include "qdpd/dpd.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {
namespace {

constexpr std::size_t kChunkRows = 16384;

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Half-open sample span.
struct Span {
  std::size_t begin;
  std::size_t end;
};

std::vector<Span> gate_spans(const QubitChannel& ch, double fs, std::size_t n, bool active) {
  std::vector<Span> spans;
  for (const auto& g : ch.gates) {
    if ((g.amplitude > 0.0) != active) continue;
    const auto b = static_cast<std::size_t>(std::llround(g.start_time * fs));
    const auto e = std::min(static_cast<std::size_t>(std::llround(g.end_time() * fs)), n);
    if (b < e) spans.push_back({b, e});
  }
  return spans;
}

double span_power(std::span<const cplx> x, const std::vector<Span>& spans, std::size_t* count) {
  double sum = 0.0;
  std::size_t c = 0;
  for (const auto& s : spans) {
    for (std::size_t i = s.begin; i < s.end; ++i) sum += std::norm(x[i]);
    c += s.end - s.begin;
  }
  if (count) *count = c;
  return sum;
}

double to_db(double ratio) { return ratio > 0.0 ? 10.0 * std::log10(ratio) : kMetricFloorDb; }

}  // namespace

void MPConfig::validate() const {
  if (K < 1 || L < 1) throw ParameterError("MP config needs K >= 1 and L >= 1");
  if (regularization < 0.0) throw ParameterError("regularization must be non-negative");
}

void fill_regressor_rows(std::span<const cplx> x, const MPConfig& config, std::size_t begin,
                         std::size_t end, Eigen::Ref<MatrixXcd> out) {
  const int K = config.K;
  for (std::size_t row = begin; row < end; ++row) {
    const auto r = static_cast<Eigen::Index>(row - begin);
    for (int l = 0; l < config.L; ++l) {
      const auto col0 = static_cast<Eigen::Index>(l) * K;
      if (row < static_cast<std::size_t>(l)) {
        for (int k = 0; k < K; ++k) out(r, col0 + k) = cplx{};
        continue;
      }
      const cplx v = x[row - static_cast<std::size_t>(l)];
      const double mag = std::abs(v);
      cplx term = v;
      for (int k = 0; k < K; ++k) {
        out(r, col0 + k) = term;
        term *= mag;
      }
    }
  }
}

MatrixXcd build_regressor(const ComplexSignal& x, const MPConfig& config) {
  config.validate();
  if (x.size() <= static_cast<std::size_t>(config.L)) {
    throw ParameterError("signal of " + std::to_string(x.size()) +
                         " samples is too short for memory depth " + std::to_string(config.L));
  }
  MatrixXcd phi(static_cast<Eigen::Index>(x.size()), config.columns());
  fill_regressor_rows(x.samples(), config, 0, x.size(), phi);
  return phi;
}

Identification identify_postinverse(const ComplexSignal& pa_in,
                                    const ComplexSignal& pa_out_aligned, const MPConfig& config) {
  config.validate();
  if (pa_in.size() != pa_out_aligned.size()) {
    throw ParameterError("PA input and aligned output differ in length");
  }
  const std::size_t rows = pa_out_aligned.size();
  if (rows <= static_cast<std::size_t>(config.L)) {
    throw ParameterError("training signal too short for memory depth");
  }
  const auto n = static_cast<Eigen::Index>(config.columns());
  const auto regressor = pa_out_aligned.samples();
  const auto target = pa_in.samples();

  // Column norms for equilibration.
  VectorXd norms = VectorXd::Zero(n);
  MatrixXcd block(static_cast<Eigen::Index>(kChunkRows), n);
  for (std::size_t b = 0; b < rows; b += kChunkRows) {
    const std::size_t e = std::min(rows, b + kChunkRows);
    auto view = block.topRows(static_cast<Eigen::Index>(e - b));
    fill_regressor_rows(regressor, config, b, e, view);
    norms += view.colwise().squaredNorm().transpose();
  }
  const double trace = norms.sum();
  VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) scale(j) = norms(j) > 0.0 ? 1.0 / std::sqrt(norms(j)) : 0.0;

  auto solve = [&](double lambda) {
    // Streamed QR: carry the n x n triangle R and Q^H t between chunks.
    MatrixXcd r = MatrixXcd::Zero(n, n);
    VectorXcd qt = VectorXcd::Zero(n);
    MatrixXcd stacked(n + static_cast<Eigen::Index>(kChunkRows), n);
    VectorXcd rhs(n + static_cast<Eigen::Index>(kChunkRows));
    auto absorb = [&](Eigen::Index extra) {
      auto a = stacked.topRows(n + extra);
      auto t = rhs.head(n + extra);
      a.topRows(n) = r;
      t.head(n) = qt;
      Eigen::HouseholderQR<MatrixXcd> qr(a);
      VectorXcd qht = qr.householderQ().adjoint() * t;
      r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
      qt = qht.head(n);
    };
    for (std::size_t b = 0; b < rows; b += kChunkRows) {
      const std::size_t e = std::min(rows, b + kChunkRows);
      const auto extra = static_cast<Eigen::Index>(e - b);
      auto view = stacked.middleRows(n, extra);
      fill_regressor_rows(regressor, config, b, e, view);
      view = view * scale.asDiagonal();
      for (Eigen::Index i = 0; i < extra; ++i) rhs(n + i) = target[b + static_cast<std::size_t>(i)];
      absorb(extra);
    }
    if (lambda > 0.0) {
      // Penalty rows sqrt(lambda) I in the unscaled coefficients.
      auto view = stacked.middleRows(n, n);
      view.setZero();
      for (Eigen::Index j = 0; j < n; ++j) view(j, j) = std::sqrt(lambda) * scale(j);
      rhs.segment(n, n).setZero();
      absorb(n);
    }
    return std::make_pair(r, qt);
  };

  double lambda = config.regularization;
  auto [r, qt] = solve(lambda);
  Eigen::JacobiSVD<MatrixXcd> svd(r);
  const auto& sv = svd.singularValues();
  double condition = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
  if (!(condition <= config.max_condition) && lambda == 0.0) {
    if (!config.ridge_fallback) {
      throw IllConditionedError("MP design matrix is rank deficient (condition " +
                                    std::to_string(condition) + ")",
                                condition);
    }
    lambda = 1e-10 * trace;
    std::tie(r, qt) = solve(lambda);
    Eigen::JacobiSVD<MatrixXcd> ridge_svd(r);
    condition = ridge_svd.singularValues()(0) / ridge_svd.singularValues()(n - 1);
  }

  VectorXcd scaled = r.triangularView<Eigen::Upper>().solve(qt);
  Identification out;
  out.coeffs = MPCoefficients(config.K, config.L);
  auto flat = out.coeffs.flat();
  for (Eigen::Index j = 0; j < n; ++j) flat[static_cast<std::size_t>(j)] = scaled(j) * scale(j);
  out.condition = condition;
  out.ridge = lambda;

  const auto fitted = evaluate_mp(regressor, out.coeffs);
  double sse = 0.0;
  for (std::size_t i = 0; i < rows; ++i) sse += std::norm(target[i] - fitted[i]);
  out.residual_mse = sse / static_cast<double>(rows);
  return out;
}

ComplexSignal apply_mp(const ComplexSignal& x, const MPCoefficients& coeffs) {
  return ComplexSignal(evaluate_mp(x.samples(), coeffs), x.sample_rate());
}

double nmse_db(std::span<const cplx> reference, std::span<const cplx> output) {
  if (reference.size() != output.size()) throw ParameterError("NMSE needs equal lengths");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    err += std::norm(output[i] - reference[i]);
    ref += std::norm(reference[i]);
  }
  if (!(ref > 0.0)) throw ParameterError("NMSE reference has no energy");
  return to_db(err / ref);
}

LinearizationMetrics linearization_metrics(const ComplexSignal& reference,
                                           const ComplexSignal& output_aligned,
                                           const std::vector<QubitChannel>& channels,
                                           const MetricsOptions& options) {
  if (reference.size() != output_aligned.size()) {
    throw ParameterError("reference and output differ in length");
  }
  LinearizationMetrics m;
  m.nmse_db = nmse_db(reference.samples(), output_aligned.samples());

  const double fs = reference.sample_rate();
  const std::size_t n = reference.size();
  std::vector<cplx> error(n);
  for (std::size_t i = 0; i < n; ++i) error[i] = output_aligned[i] - reference[i];
  const ComplexSignal error_signal(std::move(error), fs);

  // Leakage is referred to the mean active tone power over all channels, so a
  // channel that never pulses still gets a defined value.
  std::vector<double> idle_power(channels.size(), 0.0);
  double ref_sum = 0.0;
  std::size_t ref_count = 0;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& ch = channels[c];
    const auto ref_tone = dsp::extract_tone(reference, ch.freq_offset, options.bandwidth, options.transition);
    const auto out_tone =
        dsp::extract_tone(output_aligned, ch.freq_offset, options.bandwidth, options.transition);
    const auto err_tone =
        dsp::extract_tone(error_signal, ch.freq_offset, options.bandwidth, options.transition);
    const auto active = gate_spans(ch, fs, n, true);
    const auto idle = gate_spans(ch, fs, n, false);

    ChannelMetrics cm;
    cm.qubit_id = ch.qubit_id;
    std::size_t n_active = 0, n_idle = 0;
    const double ref_active = span_power(ref_tone.samples(), active, &n_active);
    const double out_active = span_power(out_tone.samples(), active, nullptr);
    cm.delta_a = ref_active > 0.0 ? std::sqrt(out_active / ref_active) - 1.0 : 0.0;
    ref_sum += ref_active;
    ref_count += n_active;
    const double leak = span_power(err_tone.samples(), idle, &n_idle);
    idle_power[c] = n_idle > 0 ? leak / static_cast<double>(n_idle) : 0.0;
    m.channels.push_back(cm);
  }
  const double ref_mean = ref_count > 0 ? ref_sum / static_cast<double>(ref_count) : 0.0;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    // Round-off in the filters leaves ~1e-30 relative power for identical inputs.
    m.channels[c].leakage_db =
        ref_mean > 0.0 ? std::max(to_db(idle_power[c] / ref_mean), kMetricFloorDb) : kMetricFloorDb;
  }
  return m;
}

void write_coefficients_csv(std::ostream& out, const MPCoefficients& c) {
  out << "k,l,re,im\n";
  for (int l = 0; l < c.memory_depth(); ++l) {
    for (int k = 1; k <= c.max_order(); ++k) {
      out << k << ',' << l << ',' << fmt_double(c.at(k, l).real()) << ','
          << fmt_double(c.at(k, l).imag()) << '\n';
    }
  }
}

MPCoefficients read_coefficients_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,l,re,im", 0) != 0) {
    throw IoError("coefficient CSV must start with header k,l,re,im");
  }
  struct Entry {
    int k, l;
    double re, im;
  };
  std::vector<Entry> entries;
  int K = 0, L = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Entry e{};
    char c1, c2, c3;
    if (!(ss >> e.k >> c1 >> e.l >> c2 >> e.re >> c3 >> e.im)) {
      throw IoError("malformed coefficient row: " + line);
    }
    K = std::max(K, e.k);
    L = std::max(L, e.l + 1);
    entries.push_back(e);
  }
  MPCoefficients coeffs(K, L);
  for (const auto& e : entries) coeffs.at(e.k, e.l) = cplx(e.re, e.im);
  return coeffs;
}

void write_metrics_csv_header(std::ostream& out) {
  out << "evaluation,nmse_db,qubit_id,delta_a,leakage_db\n";
}

void write_metrics_csv_rows(std::ostream& out, const std::string& evaluation,
                            const LinearizationMetrics& m) {
  for (const auto& c : m.channels) {
    out << evaluation << ',' << fmt_double(m.nmse_db) << ',' << c.qubit_id << ','
        << fmt_double(c.delta_a) << ',' << fmt_double(c.leakage_db) << '\n';
  }
}

}  // namespace qdpd
