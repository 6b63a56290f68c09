// Command line driver: single-level gate sequences and power sweeps.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "qdpd/errors.hpp"
#include "qdpd/experiment.hpp"
#include "qdpd/format.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool raw_only = false;
  bool dpd_only = false;
  std::optional<int> jobs;
  std::optional<int> repetitions;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("-s,--seed", c.seed, "override the configured random seed");
  auto* raw = cmd->add_flag("--raw-only", c.raw_only, "evaluate the uncorrected arm only");
  auto* dpd = cmd->add_flag("--dpd-only", c.dpd_only, "evaluate the predistorted arm only");
  raw->excludes(dpd);
  cmd->add_option("-j,--jobs", c.jobs, "worker threads over power levels (0 = all cores)");
}

qdpd::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config_path.empty() ? qdpd::ExperimentConfig{} : qdpd::load_config(c.config_path);
  if (c.seed) cfg.rng_seed = *c.seed;
  if (c.raw_only) cfg.run_dpd = false;
  if (c.dpd_only) cfg.run_raw = false;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.repetitions) cfg.n_repetitions = *c.repetitions;
  cfg.validate();
  return cfg;
}

void print_sequence_summary(const qdpd::SequenceReport& r) {
  std::printf("level %.1f dB, pulse %.4g s, condition %.3g\n", r.plan.level_db,
              r.plan.pulse_duration, r.identification.condition);
  for (const auto& [arm, m] : r.metrics) {
    double mean = 0.0;
    int n = 0;
    for (const auto& row : r.rows) {
      if (row.arm != arm) continue;
      mean += 1.0 - row.fidelity;
      ++n;
    }
    std::printf("%-4s nmse %7.2f dB  mean infidelity %.3e\n", qdpd::arm_name(arm), m.nmse_db,
                n ? mean / n : 0.0);
  }
}

void print_sweep_summary(const qdpd::SweepReport& r) {
  std::printf("%5s %8s %4s %12s %10s %9s\n", "qubit", "power_db", "arm", "infidelity", "std",
              "nmse_db");
  for (const auto& row : r.rows) {
    std::printf("%5d %8.1f %4s %12.4e %10.3e %9.2f\n", row.qubit_id, row.power_db,
                qdpd::arm_name(row.arm), row.mean_infidelity, row.std, row.nmse_db);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tone qubit drive predistortion experiments"};
  app.require_subcommand(1);

  Common seq_opts;
  std::optional<double> level;
  auto* seq = app.add_subcommand("sequence", "run gate sequences at one power level");
  add_common(seq, seq_opts);
  seq->add_option("-l,--level", level, "power level in dB relative to full drive");

  Common sweep_opts;
  std::vector<double> levels;
  auto* sweep = app.add_subcommand("sweep", "sweep the drive power and compare both arms");
  add_common(sweep, sweep_opts);
  sweep->add_option("--levels", levels, "power levels in dB (overrides the config)");
  sweep->add_option("-r,--repetitions", sweep_opts.repetitions, "noise repetitions per level");

  std::string config_out;
  auto* cfg = app.add_subcommand("config", "print the default configuration");
  cfg->add_option("-o,--out", config_out, "write to a file instead of stdout");

  std::string am_out;
  auto* am = app.add_subcommand("am-curves", "AM/AM and AM/PM of the configured PA");
  std::string am_config;
  am->add_option("-c,--config", am_config, "INI configuration file")->check(CLI::ExistingFile);
  am->add_option("-o,--out", am_out, "CSV output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*seq) {
      auto c = resolve(seq_opts);
      if (level) c.sequence_level_db = *level;
      c.validate();
      const auto report = qdpd::run_sequence_experiment(c);
      qdpd::emit_sequence_reports(report, seq_opts.out_dir);
      print_sequence_summary(report);
    } else if (*sweep) {
      auto c = resolve(sweep_opts);
      if (!levels.empty()) c.power_levels_db = levels;
      c.validate();
      const auto report = qdpd::run_power_sweep(c);
      qdpd::emit_reports(report, sweep_opts.out_dir);
      print_sweep_summary(report);
    } else if (*cfg) {
      const auto text = qdpd::format_config(qdpd::ExperimentConfig{});
      if (config_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(config_out);
        if (!(out << text)) throw qdpd::IoError("cannot write " + config_out);
      }
    } else if (*am) {
      const auto c = am_config.empty() ? qdpd::ExperimentConfig{} : qdpd::load_config(am_config);
      const auto curve = qdpd::am_curves(c.pa, 201, 1.5);
      if (am_out.empty()) {
        qdpd::write_am_curves_csv(std::cout, curve);
      } else {
        std::ofstream out(am_out);
        if (!out) throw qdpd::IoError("cannot write " + am_out);
        qdpd::write_am_curves_csv(out, curve);
      }
    }
  } catch (const qdpd::Error& e) {
    std::cerr << "qdpd: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "qdpd: unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
