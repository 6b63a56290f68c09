// Acceptance run: one line per criterion, nonzero exit if any criterion fails.
// Usage: acceptance [output_dir]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "qdpd/dpd.hpp"
#include "qdpd/dsp.hpp"
#include "qdpd/experiment.hpp"
#include "qdpd/feedback_sync.hpp"
#include "qdpd/qubit_sim.hpp"

using namespace qdpd;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome rabi_oracle() {
  const auto t0 = Clock::now();
  const double rabi = kPi / 1.6e-6;
  double worst = 0.0;
  int cases = 0;
  for (double theta : {kPi / 4, kPi / 2, kPi, 2 * kPi}) {
    for (double phase : {0.0, kPi / 2, kPi, 3 * kPi / 2, 0.7}) {
      for (std::size_t n : {50u, 400u, 4000u}) {
        for (double fs : {250e6, 1e9}) {
          const double T = static_cast<double>(n) / fs;
          const double amplitude = theta / (rabi * T);
          const ComplexSignal s(std::vector<cplx>(n, std::polar(amplitude, phase)), fs);
          // exp(+j theta/2 (cos p X + sin p Y)) applied to |0> and |+>.
          const cplx c{std::cos(theta / 2)}, js = cplx{0.0, std::sin(theta / 2)};
          for (const QubitState init :
               {QubitState::ground(), QubitState{cplx{std::sqrt(0.5)}, cplx{0.0, std::sqrt(0.5)}}}) {
            const QubitState expect{c * init.alpha + js * std::polar(1.0, -phase) * init.beta,
                                    js * std::polar(1.0, phase) * init.alpha + c * init.beta};
            EvolveOptions o;
            o.initial = init;
            o.record_trajectory = false;
            const auto ev = evolve(s, rabi, o);
            worst = std::max(worst, 1.0 - fidelity(ev.final_state, expect));
            ++cases;
          }
        }
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 1.0,
          fmt("%d cases, max infidelity %.2e (< 1e-9), %.3f s (< 1 s)", cases, worst, t)};
}

Outcome unitarity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t steps = 1000000, chunk = 10000;
  std::vector<cplx> v(steps);
  for (auto& x : v) x = {u(rng), u(rng)};
  const ComplexSignal s(std::move(v), 250e6);
  const double rabi = kPi / 1.6e-6;

  EvolveOptions o;
  o.record_trajectory = false;
  const auto ev = evolve(s, rabi, o);
  const double unit_err = ev.unitary.unitarity_error();

  // Norm drift per 1e4 steps without any renormalisation inside the chunk.
  EvolveOptions oc = o;
  oc.renormalize_every = steps + 1;
  QubitState psi = QubitState::ground();
  double drift = 0.0;
  for (std::size_t b = 0; b < steps; b += chunk) {
    const auto part = evolve(s.slice(b, chunk), rabi, oc).unitary;
    const double before = psi.norm_sq();
    psi = part.apply(psi);
    drift = std::max(drift, std::abs(std::sqrt(psi.norm_sq()) - std::sqrt(before)));
  }
  return {unit_err < 1e-8 && drift < 1e-10,
          fmt("||U^H U - I||max %.2e (< 1e-8), norm drift %.2e per 1e4 steps (< 1e-10)", unit_err,
              drift)};
}

Outcome convergence(std::string* note) {
  ExperimentConfig c;
  c.n_eval_sequences = 5;
  c.trajectory_sequence = 0;
  const auto plan = plan_level(c, 0.0);
  double worst = 0.0, worst_resampled = 0.0;
  for (const auto& ch : plan.eval_channels) {
    DownconvertOptions o;
    o.calibration_phase = 0.0;
    for (const auto& g : ch.gates) {
      if (is_pi_gate(g.kind)) {
        o.calibration_phase = g.phase;
        break;
      }
    }
    const auto bb = downconvert_channel(plan.x_eval, ch.freq_offset, o);
    const std::size_t block = 4 * plan.pulse_samples;
    const auto coarse = block_final_states(bb, c.rabi_max(), block, 1);
    const auto fine = block_final_states(bb, c.rabi_max(), block, 2);
    // Band-limited refinement: resample the transmit signal at twice the rate.
    const ComplexSignal x2(dsp::upsample(plan.x_eval.samples(), 2), 2.0 * c.sample_rate);
    const auto bb2 = downconvert_channel(x2, ch.freq_offset, o);
    const auto resampled = block_final_states(bb2, c.rabi_max(), 2 * block, 1);
    for (std::size_t b = 0; b < coarse.size(); ++b) {
      QubitState ideal = QubitState::ground();
      for (std::size_t g = 0; g < 4; ++g) {
        const auto& gate = ch.gates[b * 4 + g];
        if (is_pi_gate(gate.kind)) ideal = drive_rotation(gate.phase, kPi).apply(ideal);
      }
      const double f1 = fidelity(coarse[b], ideal);
      worst = std::max(worst, std::abs(fidelity(fine[b], ideal) - f1));
      worst_resampled = std::max(worst_resampled, std::abs(fidelity(resampled[b], ideal) - f1));
    }
  }
  *note = fmt("band-limited 2x resampling of the IF signal changes F by at most %.2e",
              worst_resampled);
  return {worst < 1e-8, fmt("halving dt (2 substeps) changes F by at most %.2e (< 1e-8)", worst)};
}

Outcome ls_recovery() {
  MPConfig c;
  c.K = 3;
  c.L = 2;
  MpGrid truth(3, 2);
  const cplx values[] = {{0.98, 0.05}, {0.02, -0.01}, {-0.21, 0.08},
                         {0.07, -0.04}, {0.005, 0.002}, {0.03, 0.02}};
  for (std::size_t j = 0; j < truth.size(); ++j) truth.flat()[j] = values[j];
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.35);
  std::vector<cplx> y(60000);
  for (auto& v : y) v = {g(rng), g(rng)};
  const ComplexSignal out(y, 250e6);
  const auto in = apply_mp(out, truth);
  const auto id = identify_postinverse(in, out, c);
  double coeff_err = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    coeff_err = std::max(coeff_err, std::abs(id.coeffs.flat()[j] - truth.flat()[j]));
  }

  // Orthogonality on a target the model cannot represent.
  std::vector<cplx> t(y.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = in[i] + 0.1 * std::conj(y[i]);
  const ComplexSignal target(t, 250e6);
  const auto fit = identify_postinverse(target, out, c);
  const auto phi = build_regressor(out, c);
  Eigen::VectorXcd r(static_cast<Eigen::Index>(t.size()));
  const auto model = apply_mp(out, fit.coeffs);
  for (std::size_t i = 0; i < t.size(); ++i) r(static_cast<Eigen::Index>(i)) = t[i] - model[i];
  const double ortho = (phi.adjoint() * r).norm() / (phi.norm() * r.norm());
  return {coeff_err < 1e-8 && ortho < 1e-8,
          fmt("max coefficient error %.2e (< 1e-8), residual orthogonality %.2e (< 1e-8)",
              coeff_err, ortho)};
}

Outcome sync_accuracy() {
  ExperimentConfig c;
  c.n_eval_sequences = 4;
  c.trajectory_sequence = 0;
  const auto plan = plan_level(c, 0.0);
  const auto mls = generate_mls(c.mls_order, c.mls_seed, c.samples_per_chip);
  const auto frame = prepend_preamble(plan.x_eval, mls, c.preamble_amplitude);
  const cplx gain = std::polar(17.3, -2.2);
  double delay_err = 0.0, gain_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double d = 0.1 * i;
    auto rx = dsp::fractional_delay(frame.signal.samples(), d);
    for (auto& v : rx) v *= gain;
    const auto r = estimate_alignment(frame.signal, ComplexSignal(std::move(rx), c.sample_rate),
                                      c.upsample_factor, frame.preamble_len);
    delay_err = std::max(delay_err, std::abs(r.delay_samples - d));
    gain_err = std::max(gain_err, std::abs(r.complex_gain - gain) / std::abs(gain));
  }
  return {delay_err <= 0.05 && gain_err < 1e-6,
          fmt("delays 0.0..9.9: max error %.3f samples (<= 0.05), relative gain error %.2e (< 1e-6)",
              delay_err, gain_err)};
}

Outcome dpd_signal_level() {
  ExperimentConfig c;
  c.sequence_level_db = 0.0;
  const auto r = run_sequence_experiment(c);
  const LinearizationMetrics* raw = nullptr;
  const LinearizationMetrics* dpd = nullptr;
  for (const auto& [arm, m] : r.metrics) (arm == Arm::Raw ? raw : dpd) = &m;
  const double nmse_gain = raw->nmse_db - dpd->nmse_db;
  double leak_drop = 1e9;
  for (std::size_t q = 0; q < raw->channels.size(); ++q) {
    leak_drop = std::min(leak_drop, raw->channels[q].leakage_db - dpd->channels[q].leakage_db);
  }
  return {nmse_gain >= 15.0 && leak_drop >= 10.0,
          fmt("NMSE %.1f -> %.1f dB (improvement %.1f >= 15), idle leakage drop >= %.1f dB (>= 10) "
              "on every channel",
              raw->nmse_db, dpd->nmse_db, nmse_gain, leak_drop)};
}

Outcome qubit_level(const SweepReport& sweep, double runtime) {
  int violations = 0, total = 0;
  double worst_margin = -1.0;
  for (const auto& row : sweep.rows) {
    if (row.arm != Arm::Dpd) continue;
    const auto& raw = sweep.row(row.qubit_id, row.power_db, Arm::Raw);
    ++total;
    if (row.mean_infidelity > raw.mean_infidelity) ++violations;
    worst_margin = std::max(worst_margin, row.mean_infidelity / raw.mean_infidelity);
  }
  return {violations == 0 && runtime < 600.0,
          fmt("dpd <= raw at %d/%d (qubit, level) points, worst dpd/raw %.3f; sweep %.0f s (< 600 s)",
              total - violations, total, worst_margin, runtime)};
}

Outcome fair_baseline(const SweepReport& sweep) {
  double worst = 0.0;
  int worst_q = 0;
  for (int q = 0; q < sweep.config.n_qubits; ++q) {
    double lo = 1e300, hi = 0.0;
    for (double p : sweep.config.power_levels_db) {
      const double v = sweep.row(q, p, Arm::Raw).mean_infidelity;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi / lo > worst) {
      worst = hi / lo;
      worst_q = q;
    }
  }
  return {worst < 3.0, fmt("raw infidelity max/min across levels %.3g on qubit %d (< 3)", worst, worst_q)};
}

Outcome identity_sequences() {
  ExperimentConfig c;
  c.pa = PAParams::linear(25.48);
  const auto r = run_sequence_experiment(c);
  double worst = 0.0;
  for (const auto& row : r.rows) worst = std::max(worst, std::abs(1.0 - row.fidelity));
  double ideal_min = 1.0;
  for (const auto& row : r.ideal_rows) ideal_min = std::min(ideal_min, row.fidelity);
  return {worst <= 1e-6 && ideal_min < 1.0,
          fmt("linear PA: max |1 - F| %.2e over %zu blocks (<= 1e-6); min F(ideal, reference) "
              "%.6f (< 1)",
              worst, r.rows.size(), ideal_min)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = s.str();
  }
  return out;
}

Outcome determinism(const fs::path& base) {
  ExperimentConfig c;
  c.n_training_sequences = 20;
  c.n_eval_sequences = 6;
  c.trajectory_sequence = 3;
  c.n_repetitions = 2;
  c.power_levels_db = {-10.0, -4.0, 0.0};
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = base / ("determinism_" + std::to_string(i));
    fs::remove_all(dir);
    emit_sequence_reports(run_sequence_experiment(c), dir / "sequence");
    emit_reports(run_power_sweep(c), dir / "sweep");
    runs[i] = csv_files(dir);
  }
  std::size_t differing = 0;
  for (const auto& [name, body] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != body) ++differing;
  }
  const bool same = differing == 0 && runs[0].size() == runs[1].size() && !runs[0].empty();
  return {same, fmt("%zu CSV files compared, %zu differ", runs[0].size(), differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "qdpd_acceptance";
  fs::create_directories(out);

  int failed = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s  %2d  %-34s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  const auto guarded = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "closed-form Rabi oracle", rabi_oracle);
  guarded(2, "unitarity and norm conservation", unitarity);
  std::string note;
  guarded(3, "product-formula convergence", [&] { return convergence(&note); });
  if (!note.empty()) std::printf("          (info) %s\n", note.c_str());
  guarded(4, "LS recovery", ls_recovery);
  guarded(5, "sync accuracy", sync_accuracy);
  guarded(6, "DPD efficacy, signal level", dpd_signal_level);

  SweepReport sweep;
  double runtime = 0.0;
  bool have_sweep = false;
  try {
    const auto t0 = Clock::now();
    sweep = run_power_sweep(ExperimentConfig{});
    runtime = seconds_since(t0);
    emit_reports(sweep, out / "sweep");
    have_sweep = true;
  } catch (const std::exception& e) {
    report(7, "DPD efficacy, qubit level", {false, std::string("error: ") + e.what()});
    report(8, "fair baseline", {false, "no sweep"});
  }
  if (have_sweep) {
    guarded(7, "DPD efficacy, qubit level", [&] { return qubit_level(sweep, runtime); });
    guarded(8, "fair baseline", [&] { return fair_baseline(sweep); });
  }
  guarded(9, "identity sequences", identity_sequences);
  guarded(10, "determinism", [&] { return determinism(out); });

  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
