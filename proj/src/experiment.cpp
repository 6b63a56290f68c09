#include "qdpd/experiment.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <mutex>
#include <thread>
#include <cstdio>

#include <nlohmann/json.hpp>
#include "qdpd/dsp.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/format.hpp"

namespace qdpd {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kGatesPerBlock = 4;

// splitmix64 finaliser; derives independent stream seeds from the run seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::uint64_t z = a;
  for (std::uint64_t v : {b, c}) {
    z += 0x9e3779b97f4a7c15ULL + v;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

enum Stream : std::uint64_t { kTrainGates = 1, kTrainNoise = 2, kEvalNoise = 3 };

QubitState ideal_block_state(const QubitChannel& channel, std::size_t block) {
  QubitState psi = QubitState::ground();
  for (std::size_t g = 0; g < kGatesPerBlock; ++g) {
    const auto& gate = channel.gates[block * kGatesPerBlock + g];
    if (is_pi_gate(gate.kind)) psi = drive_rotation(gate.phase, kPi).apply(psi);
  }
  return psi;
}

DownconvertOptions channel_options(const ExperimentConfig& config, const LevelPlan& plan,
                                   const QubitChannel& channel) {
  DownconvertOptions o;
  o.bandwidth = config.channel_bandwidth;
  o.transition = config.channel_transition;
  o.calibration_amplitude = plan.amplitude;
  for (const auto& g : channel.gates) {
    if (is_pi_gate(g.kind)) {
      o.calibration_phase = g.phase;
      break;
    }
  }
  return o;
}

MetricsOptions metrics_options(const ExperimentConfig& config) {
  return {config.channel_bandwidth, config.channel_transition};
}

// Per-qubit block states of one transmitted/received signal.
std::vector<std::vector<QubitState>> qubit_block_states(const ExperimentConfig& config,
                                                        const LevelPlan& plan,
                                                        const ComplexSignal& signal) {
  std::vector<std::vector<QubitState>> out;
  for (const auto& ch : plan.eval_channels) {
    const auto bb = downconvert_channel(signal, ch.freq_offset, channel_options(config, plan, ch));
    out.push_back(block_final_states(bb, config.rabi_max(), kGatesPerBlock * plan.pulse_samples,
                                     config.substeps));
  }
  return out;
}

ComplexSignal arm_input(Arm arm, const ComplexSignal& x, const MPCoefficients& coeffs) {
  return arm == Arm::Dpd ? apply_mp(x, coeffs) : x;
}

PAParams noise_free(PAParams pa) {
  pa.noise_floor_dbc.reset();
  return pa;
}

struct TrainedLevel {
  LevelPlan plan;
  Identification identification;
};

TrainedLevel train_level(const ExperimentConfig& config, double level_db, std::size_t level_index) {
  TrainedLevel t{plan_level(config, level_db), {}};
  PAParams pa = config.pa;
  pa.rng_seed = mix_seed(config.rng_seed, kTrainNoise, level_index);
  const auto out = run_chain(config, pa, t.plan.x_train, t.plan.x_train);
  t.identification = identify_postinverse(t.plan.x_train, out.aligned, config.mp);
  return t;
}

std::string level_tag(double db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%.1fdB", db < 0 ? "m" : "p", std::abs(db));
  return buf;
}

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

nlohmann::ordered_json versions() {
  nlohmann::ordered_json v;
  v["qdpd"] = "0.1.0";
  v["fftw"] = std::string(fftw_version);
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  v["compiler"] = __VERSION__;
  return v;
}

}  // namespace

const char* arm_name(Arm arm) { return arm == Arm::Raw ? "raw" : "dpd"; }

void ExperimentConfig::validate() const {
  if (n_qubits < 1) throw ParameterError("n_qubits must be >= 1");
  if (!tone_offsets.empty() && tone_offsets.size() != static_cast<std::size_t>(n_qubits)) {
    throw ParameterError("need one tone offset per qubit");
  }
  if (!(pulse_duration > 0.0)) throw ParameterError("pulse_duration must be positive");
  if (n_training_sequences < 1 || n_eval_sequences < 1) {
    throw ParameterError("sequence counts must be >= 1");
  }
  if (power_levels_db.empty()) throw ParameterError("no power levels");
  for (double p : power_levels_db) {
    if (!std::isfinite(p) || p > 0.0) throw ParameterError("power levels must be finite and <= 0 dB");
  }
  if (n_repetitions < 1) throw ParameterError("n_repetitions must be >= 1");
  if (!(sample_rate > 0.0)) throw ParameterError("sample_rate must be positive");
  if (substeps < 1) throw ParameterError("substeps must be >= 1");
  if (!(pa_drive > 0.0)) throw ParameterError("pa_drive must be positive");
  if (!(preamble_amplitude > 0.0)) throw ParameterError("preamble_amplitude must be positive");
  if (upsample_factor < 1) throw ParameterError("upsample_factor must be >= 1");
  if (!(channel_bandwidth > 0.0) || !(channel_transition > 0.0)) {
    throw ParameterError("channel filter widths must be positive");
  }
  if (!std::isfinite(sequence_level_db) || sequence_level_db > 0.0) {
    throw ParameterError("sequence_level_db must be <= 0 dB");
  }
  if (trajectory_sequence < 0 || trajectory_sequence >= n_eval_sequences) {
    throw ParameterError("trajectory_sequence out of range");
  }
  if (!run_raw && !run_dpd) throw ParameterError("both arms disabled");
  if (jobs < 0) throw ParameterError("jobs must be >= 0");
  mp.validate();
  pa.validate();
}

std::vector<double> ExperimentConfig::offsets() const {
  return tone_offsets.empty() ? default_tone_offsets(n_qubits) : tone_offsets;
}

double ExperimentConfig::rabi_max() const { return kPi / pulse_duration; }

std::vector<Arm> ExperimentConfig::arms() const {
  std::vector<Arm> a;
  if (run_raw) a.push_back(Arm::Raw);
  if (run_dpd) a.push_back(Arm::Dpd);
  return a;
}

LevelPlan plan_level(const ExperimentConfig& config, double level_db) {
  config.validate();
  LevelPlan p;
  p.level_db = level_db;
  const double a = std::pow(10.0, level_db / 20.0);
  p.pulse_samples = static_cast<std::size_t>(std::llround(config.pulse_duration / a * config.sample_rate));
  if (p.pulse_samples < 2) throw ResolutionError("pulse shorter than two samples");
  p.pulse_duration = static_cast<double>(p.pulse_samples) / config.sample_rate;
  p.amplitude = kPi / (config.rabi_max() * p.pulse_duration);

  SequenceOptions so;
  so.n_qubits = config.n_qubits;
  so.pulse_duration = p.pulse_duration;
  so.pi_amplitude = p.amplitude;
  so.freq_offsets = config.offsets();
  so.block_rule = config.block_rule;

  so.rng_seed = config.rng_seed;
  so.n_sequences = config.n_eval_sequences;
  p.eval_channels = build_gate_sequence(so);
  so.rng_seed = mix_seed(config.rng_seed, kTrainGates);
  so.n_sequences = config.n_training_sequences;
  p.train_channels = build_gate_sequence(so);

  const cplx drive{config.pa_drive, 0.0};
  p.x_train = assemble_multitone_if(p.train_channels, config.sample_rate, config.rabi_max()).signal * drive;
  p.x_eval = assemble_multitone_if(p.eval_channels, config.sample_rate, config.rabi_max()).signal * drive;
  return p;
}

ChainOutput run_chain(const ExperimentConfig& config, const PAParams& pa,
                      const ComplexSignal& pa_input, const ComplexSignal& reference) {
  if (pa_input.size() != reference.size()) {
    throw ParameterError("PA input and reference payloads differ in length");
  }
  const auto mls = generate_mls(config.mls_order, config.mls_seed, config.samples_per_chip);
  const auto tx = prepend_preamble(pa_input, mls, config.preamble_amplitude);
  const auto ref = prepend_preamble(reference, mls, config.preamble_amplitude);
  const auto rx = apply_pa(pa, tx.signal);

  SyncOptions so;
  so.preamble_len = tx.preamble_len;
  so.upsample_factor = config.upsample_factor;
  so.min_peak_db = config.min_peak_db;
  ChainOutput out;
  out.sync = estimate_alignment(ref.signal, rx, so);
  out.aligned = align_and_strip(rx, out.sync, tx.preamble_len, reference.size());
  out.payload_gain = dsp::ls_gain(out.aligned.samples(), reference.samples());
  if (out.payload_gain == cplx{}) throw SyncError("aligned payload carries no signal", 0.0);
  out.aligned *= 1.0 / out.payload_gain;
  return out;
}

std::vector<QubitState> block_final_states(const ComplexSignal& s_bb, double rabi_max,
                                           std::size_t block_samples, int substeps) {
  if (block_samples == 0) throw ParameterError("block_samples must be positive");
  std::vector<QubitState> states;
  EvolveOptions eo;
  eo.substeps = substeps;
  eo.record_trajectory = false;
  for (std::size_t b = 0; b + block_samples <= s_bb.size(); b += block_samples) {
    states.push_back(evolve(s_bb.slice(b, block_samples), rabi_max, eo).final_state);
  }
  return states;
}

SequenceReport run_sequence_experiment(const ExperimentConfig& config) {
  config.validate();
  SequenceReport r;
  r.config = config;
  auto trained = train_level(config, config.sequence_level_db, 0);
  r.plan = std::move(trained.plan);
  r.identification = std::move(trained.identification);
  const auto& plan = r.plan;
  r.dt = 1.0 / config.sample_rate;

  const auto ref_states = qubit_block_states(config, plan, plan.x_eval);
  const std::size_t block = kGatesPerBlock * plan.pulse_samples;
  const auto seq = static_cast<std::size_t>(config.trajectory_sequence);

  const auto trajectory = [&](const ComplexSignal& signal, const QubitChannel& ch) {
    const auto bb = downconvert_channel(signal, ch.freq_offset, channel_options(config, plan, ch));
    EvolveOptions eo;
    eo.substeps = config.substeps;
    return evolve(bb.slice(seq * block, block), config.rabi_max(), eo).trajectory;
  };

  for (std::size_t q = 0; q < plan.eval_channels.size(); ++q) {
    const auto& ch = plan.eval_channels[q];
    std::vector<GateKind> gates;
    for (std::size_t g = 0; g < kGatesPerBlock; ++g) gates.push_back(ch.gates[seq * kGatesPerBlock + g].kind);
    r.trajectory_gates.push_back(gates);
    r.trajectories.push_back({"theory", ch.qubit_id, trajectory(plan.x_eval, ch)});
    for (std::size_t s = 0; s < ref_states[q].size(); ++s) {
      r.ideal_rows.push_back({Arm::Raw, ch.qubit_id, static_cast<int>(s),
                              fidelity(ideal_block_state(ch, s), ref_states[q][s])});
    }
  }

  PAParams pa = config.pa;
  pa.rng_seed = mix_seed(config.rng_seed, kEvalNoise, 0);
  for (Arm arm : config.arms()) {
    const auto out = run_chain(config, pa, arm_input(arm, plan.x_eval, r.identification.coeffs),
                               plan.x_eval);
    r.syncs.emplace_back(arm, out.sync);
    r.metrics.emplace_back(arm, linearization_metrics(plan.x_eval, out.aligned, plan.eval_channels,
                                                      metrics_options(config)));
    const auto states = qubit_block_states(config, plan, out.aligned);
    for (std::size_t q = 0; q < states.size(); ++q) {
      const int id = plan.eval_channels[q].qubit_id;
      for (std::size_t s = 0; s < states[q].size(); ++s) {
        r.rows.push_back({arm, id, static_cast<int>(s), fidelity(states[q][s], ref_states[q][s])});
      }
      r.trajectories.push_back({arm_name(arm), id, trajectory(out.aligned, plan.eval_channels[q])});
    }
  }
  return r;
}

const SweepRow& SweepReport::row(int qubit, double power_db, Arm arm) const {
  for (const auto& r : rows) {
    if (r.qubit_id == qubit && r.power_db == power_db && r.arm == arm) return r;
  }
  throw ParameterError("no sweep row for the requested qubit, level and arm");
}

SweepReport run_power_sweep(const ExperimentConfig& config) {
  config.validate();
  SweepReport report;
  report.config = config;
  auto levels = config.power_levels_db;
  std::sort(levels.begin(), levels.end());
  report.config.power_levels_db = levels;

  const auto arms = config.arms();
  std::vector<std::vector<SweepRow>> level_rows(levels.size());
  report.levels.resize(levels.size());

  parallel_for(levels.size(), config.jobs, [&](std::size_t li) {
    const auto trained = train_level(config, levels[li], li);
    const auto& plan = trained.plan;
    const auto& coeffs = trained.identification.coeffs;

    LevelSummary& summary = report.levels[li];
    summary.power_db = levels[li];
    summary.pulse_duration = plan.pulse_duration;
    summary.effective_gain = measure_linear_gain(noise_free(config.pa), plan.x_eval);
    summary.identification = trained.identification;

    const auto ref_states = qubit_block_states(config, plan, plan.x_eval);
    const std::size_t nq = plan.eval_channels.size();
    for (std::size_t q = 0; q < nq; ++q) {
      double sum = 0.0;
      for (std::size_t s = 0; s < ref_states[q].size(); ++s) {
        sum += 1.0 - fidelity(ideal_block_state(plan.eval_channels[q], s), ref_states[q][s]);
      }
      summary.ideal_infidelity.push_back(sum / static_cast<double>(ref_states[q].size()));
    }

    // [arm][qubit] -> per-repetition values
    struct Acc {
      std::vector<double> infidelity;
      double nmse = 0.0, delta_a = 0.0, leakage = 0.0;
    };
    std::vector<std::vector<Acc>> acc(arms.size(), std::vector<Acc>(nq));
    std::vector<ComplexSignal> inputs;
    for (Arm arm : arms) inputs.push_back(arm_input(arm, plan.x_eval, coeffs));

    for (int rep = 0; rep < config.n_repetitions; ++rep) {
      PAParams pa = config.pa;
      // Both arms see the same noise realisation within a repetition.
      pa.rng_seed = mix_seed(config.rng_seed, kEvalNoise, li * 1000003ULL + static_cast<std::uint64_t>(rep));
      for (std::size_t ai = 0; ai < arms.size(); ++ai) {
        const auto out = run_chain(config, pa, inputs[ai], plan.x_eval);
        const auto m = linearization_metrics(plan.x_eval, out.aligned, plan.eval_channels,
                                             metrics_options(config));
        const auto states = qubit_block_states(config, plan, out.aligned);
        for (std::size_t q = 0; q < nq; ++q) {
          double sum = 0.0;
          for (std::size_t s = 0; s < states[q].size(); ++s) {
            sum += 1.0 - fidelity(states[q][s], ref_states[q][s]);
          }
          auto& a = acc[ai][q];
          a.infidelity.push_back(sum / static_cast<double>(states[q].size()));
          a.nmse += m.nmse_db;
          a.delta_a += m.channels[q].delta_a;
          a.leakage += m.channels[q].leakage_db;
        }
      }
    }

    const double reps = config.n_repetitions;
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t ai = 0; ai < arms.size(); ++ai) {
        const auto& a = acc[ai][q];
        double mean = 0.0;
        for (double v : a.infidelity) mean += v;
        mean /= reps;
        double var = 0.0;
        for (double v : a.infidelity) var += (v - mean) * (v - mean);
        const double sem = a.infidelity.size() > 1 ? std::sqrt(var / (reps - 1.0) / reps) : 0.0;
        level_rows[li].push_back({plan.eval_channels[q].qubit_id, levels[li], arms[ai], mean, sem,
                                  a.nmse / reps, a.delta_a / reps, a.leakage / reps});
      }
    }
  });

  for (auto& rows : level_rows) {
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.qubit_id != b.qubit_id) return a.qubit_id < b.qubit_id;
    if (a.power_db != b.power_db) return a.power_db < b.power_db;
    return a.arm < b.arm;
  });
  return report;
}

void emit_reports(const SweepReport& report, const std::filesystem::path& out_dir) {
  std::vector<std::string> files;
  {
    auto out = open_out(out_dir / "sweep.csv");
    out << "qubit,power_db,arm,mean_infidelity,std,nmse_db,delta_a,leakage_db\n";
    for (const auto& r : report.rows) {
      out << r.qubit_id << ',' << fmt_double(r.power_db) << ',' << arm_name(r.arm) << ','
          << fmt_double(r.mean_infidelity) << ',' << fmt_double(r.std) << ','
          << fmt_double(r.nmse_db) << ',' << fmt_double(r.delta_a) << ','
          << fmt_double(r.leakage_db) << '\n';
    }
    files.push_back("sweep.csv");
  }
  {
    auto out = open_out(out_dir / "levels.csv");
    out << "power_db,pulse_duration,gain_db,gain_phase_deg,condition,residual_mse,ridge";
    const std::size_t nq = report.levels.empty() ? 0 : report.levels.front().ideal_infidelity.size();
    for (std::size_t q = 0; q < nq; ++q) out << ",ideal_infidelity_q" << q;
    out << '\n';
    for (const auto& l : report.levels) {
      out << fmt_double(l.power_db) << ',' << fmt_double(l.pulse_duration) << ','
          << fmt_double(20.0 * std::log10(std::abs(l.effective_gain))) << ','
          << fmt_double(std::arg(l.effective_gain) * 180.0 / kPi) << ','
          << fmt_double(l.identification.condition) << ','
          << fmt_double(l.identification.residual_mse) << ','
          << fmt_double(l.identification.ridge);
      for (double v : l.ideal_infidelity) out << ',' << fmt_double(v);
      out << '\n';
    }
    files.push_back("levels.csv");
  }
  for (const auto& l : report.levels) {
    const std::string name = "coefficients/" + level_tag(l.power_db) + ".csv";
    auto out = open_out(out_dir / name);
    write_coefficients_csv(out, l.identification.coeffs);
    files.push_back(name);
  }

  nlohmann::ordered_json m;
  m["command"] = "sweep";
  m["seed"] = report.config.rng_seed;
  m["config"] = format_config(report.config);
  m["versions"] = versions();
  m["outputs"] = files;
  auto out = open_out(out_dir / "manifest.json");
  out << m.dump(2) << '\n';
}

void emit_sequence_reports(const SequenceReport& report, const std::filesystem::path& out_dir) {
  std::vector<std::string> files;
  const auto write_rows = [&](const std::string& name, const std::vector<FidelityRow>& rows,
                              std::optional<Arm> arm) {
    auto out = open_out(out_dir / name);
    out << "qubit_id,sequence_index,F\n";
    for (const auto& r : rows) {
      if (arm && r.arm != *arm) continue;
      out << r.qubit_id << ',' << r.sequence_index << ',' << fmt_double(r.fidelity) << '\n';
    }
    files.push_back(name);
  };
  for (Arm arm : report.config.arms()) {
    write_rows(std::string("fidelity_") + arm_name(arm) + ".csv", report.rows, arm);
  }
  write_rows("fidelity_ideal.csv", report.ideal_rows, std::nullopt);

  for (const auto& t : report.trajectories) {
    const std::string name =
        "trajectories/q" + std::to_string(t.qubit_id) + "_" + t.label + ".csv";
    auto out = open_out(out_dir / name);
    write_trajectory_csv(out, t.points, report.dt);
    files.push_back(name);
  }
  {
    auto out = open_out(out_dir / "metrics.csv");
    write_metrics_csv_header(out);
    for (const auto& [arm, m] : report.metrics) write_metrics_csv_rows(out, arm_name(arm), m);
    files.push_back("metrics.csv");
  }
  {
    auto out = open_out(out_dir / "sync.csv");
    out << "arm,";
    write_sync_csv_header(out);
    for (const auto& [arm, s] : report.syncs) {
      out << arm_name(arm) << ',';
      write_sync_csv_row(out, s);
    }
    files.push_back("sync.csv");
  }
  {
    auto out = open_out(out_dir / "coefficients.csv");
    write_coefficients_csv(out, report.identification.coeffs);
    files.push_back("coefficients.csv");
  }
  {
    auto out = open_out(out_dir / "am_curves.csv");
    write_am_curves_csv(out, am_curves(report.config.pa, 201, 1.5));
    files.push_back("am_curves.csv");
  }

  nlohmann::ordered_json m;
  m["command"] = "sequence";
  m["seed"] = report.config.rng_seed;
  m["level_db"] = report.plan.level_db;
  m["pulse_duration"] = report.plan.pulse_duration;
  m["condition"] = report.identification.condition;
  nlohmann::ordered_json gates = nlohmann::ordered_json::array();
  for (const auto& g : report.trajectory_gates) {
    std::vector<std::string> names;
    for (GateKind k : g) names.emplace_back(gate_name(k));
    gates.push_back(names);
  }
  m["trajectory_sequence"] = report.config.trajectory_sequence;
  m["trajectory_gates"] = gates;
  m["config"] = format_config(report.config);
  m["versions"] = versions();
  m["outputs"] = files;
  auto out = open_out(out_dir / "manifest.json");
  out << m.dump(2) << '\n';
}

std::optional<PatternMatch> find_sequence_pattern(const ExperimentConfig& config,
                                                  const std::vector<GateKind>& pattern,
                                                  std::uint64_t first_seed, int max_tries) {
  SequenceOptions so;
  so.n_qubits = config.n_qubits;
  so.n_sequences = config.n_eval_sequences;
  so.pulse_duration = config.pulse_duration;
  so.freq_offsets = config.offsets();
  so.block_rule = config.block_rule;
  for (int t = 0; t < max_tries; ++t) {
    so.rng_seed = first_seed + static_cast<std::uint64_t>(t);
    const auto channels = build_gate_sequence(so);
    for (const auto& ch : channels) {
      for (std::size_t b = 0; b * pattern.size() < ch.gates.size(); ++b) {
        bool match = true;
        for (std::size_t g = 0; g < pattern.size() && match; ++g) {
          match = ch.gates[b * pattern.size() + g].kind == pattern[g];
        }
        if (match) return PatternMatch{so.rng_seed, ch.qubit_id, static_cast<int>(b)};
      }
    }
  }
  return std::nullopt;
}

}  // namespace qdpd
