#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qdpd/dpd.hpp"
#include "qdpd/feedback_sync.hpp"
#include "qdpd/pa_model.hpp"
#include "qdpd/qubit_sim.hpp"
#include "qdpd/signal_gen.hpp"

namespace qdpd {

enum class Arm { Raw, Dpd };
const char* arm_name(Arm arm);

struct ExperimentConfig {
  std::uint64_t rng_seed = 7;
  int n_qubits = 4;
  /// Hz; empty selects 20, 30, 40, ... MHz.
  std::vector<double> tone_offsets;
  /// Pulse duration at the 0 dB level. Lower levels stretch it by the inverse
  /// amplitude factor.
  double pulse_duration = 1.6e-6;
  int n_training_sequences = 50;
  int n_eval_sequences = 20;
  /// dB relative to full drive, ascending.
  std::vector<double> power_levels_db = {-20, -18, -16, -14, -12, -10, -8, -6, -4, -2, 0};
  int n_repetitions = 10;
  MPConfig mp;
  PAParams pa = PAParams::default_device();
  double sample_rate = 250e6;
  int substeps = 1;

  /// PA input amplitude of one amplitude-1 tone; 0.25 puts four coincident
  /// tones at full scale.
  double pa_drive = 0.25;
  BlockRule block_rule = BlockRule::InversePair;

  int mls_order = 10;
  std::uint32_t mls_seed = 1;
  int samples_per_chip = 2;
  double preamble_amplitude = 0.5;
  int upsample_factor = 10;
  double min_peak_db = 6.0;

  double channel_bandwidth = 4e6;
  double channel_transition = 4e6;

  /// Level used by the single-level `sequence` run.
  double sequence_level_db = 0.0;
  /// Zero-based sequence whose trajectories are exported.
  int trajectory_sequence = 14;

  bool run_raw = true;
  bool run_dpd = true;
  /// Worker threads for independent power levels; 0 = hardware concurrency.
  int jobs = 0;

  void validate() const;
  std::vector<double> offsets() const;
  /// Rabi rate of an amplitude-1 drive: a 0 dB pulse is a pi rotation.
  double rabi_max() const;
  std::vector<Arm> arms() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
/// INI text that parse_config reads back into an equal configuration.
std::string format_config(const ExperimentConfig& config);

/// Everything that is fixed for one power level.
struct LevelPlan {
  double level_db = 0.0;
  double amplitude = 1.0;       // per-tone amplitude of the pi pulses
  double pulse_duration = 0.0;  // seconds, on the sample grid
  std::size_t pulse_samples = 0;
  std::vector<QubitChannel> train_channels;
  std::vector<QubitChannel> eval_channels;
  ComplexSignal x_train;  // PA-input scale
  ComplexSignal x_eval;
};

LevelPlan plan_level(const ExperimentConfig& config, double level_db);

/// Transmit -> PA -> feedback receiver for one payload.
struct ChainOutput {
  SyncResult sync;
  /// Gain of the aligned payload against the reference payload; the output
  /// below has been divided by it.
  cplx payload_gain;
  ComplexSignal aligned;
};

ChainOutput run_chain(const ExperimentConfig& config, const PAParams& pa,
                      const ComplexSignal& pa_input, const ComplexSignal& reference);

/// Final states of consecutive blocks, each evolved from |0>.
std::vector<QubitState> block_final_states(const ComplexSignal& s_bb, double rabi_max,
                                           std::size_t block_samples, int substeps);

struct FidelityRow {
  Arm arm;
  int qubit_id;
  int sequence_index;
  double fidelity;
};

struct TrajectoryExport {
  std::string label;  // "raw", "dpd" or "theory"
  int qubit_id;
  std::vector<BlochPoint> points;
};

struct SequenceReport {
  ExperimentConfig config;
  LevelPlan plan;
  Identification identification;
  std::vector<FidelityRow> rows;
  /// F(ideal |0>, theoretical reference) per qubit and sequence.
  std::vector<FidelityRow> ideal_rows;
  std::vector<std::pair<Arm, LinearizationMetrics>> metrics;
  std::vector<std::pair<Arm, SyncResult>> syncs;
  std::vector<TrajectoryExport> trajectories;
  double dt = 0.0;
  /// Gate pattern of the exported sequence for each qubit.
  std::vector<std::vector<GateKind>> trajectory_gates;
};

/// One power level, both arms, one repetition, with trajectories.
SequenceReport run_sequence_experiment(const ExperimentConfig& config);

struct SweepRow {
  int qubit_id;
  double power_db;
  Arm arm;
  double mean_infidelity;
  /// Standard error of the mean over repetitions.
  double std;
  double nmse_db;
  double delta_a;
  double leakage_db;
};

struct LevelSummary {
  double power_db;
  double pulse_duration;
  /// LS gain of the noise-free PA on the level's evaluation signal.
  cplx effective_gain;
  Identification identification;
  std::vector<double> ideal_infidelity;  // per qubit, ideal vs theoretical reference
};

struct SweepReport {
  ExperimentConfig config;
  std::vector<SweepRow> rows;
  std::vector<LevelSummary> levels;

  const SweepRow& row(int qubit, double power_db, Arm arm) const;
};

SweepReport run_power_sweep(const ExperimentConfig& config);

/// sweep.csv, levels.csv, coefficients/*.csv and manifest.json.
void emit_reports(const SweepReport& report, const std::filesystem::path& out_dir);
/// fidelity_*.csv, trajectories/*.csv, metrics.csv, sync.csv,
/// coefficients.csv, am_curves.csv and manifest.json.
void emit_sequence_reports(const SequenceReport& report, const std::filesystem::path& out_dir);

/// Searches seeds from `first_seed` for a qubit/sequence whose gates match
/// `pattern`. Returns the seed and fills qubit and sequence, or returns
/// nullopt after `max_tries` seeds.
struct PatternMatch {
  std::uint64_t seed;
  int qubit_id;
  int sequence_index;
};
std::optional<PatternMatch> find_sequence_pattern(const ExperimentConfig& config,
                                                  const std::vector<GateKind>& pattern,
                                                  std::uint64_t first_seed, int max_tries);

}  // namespace qdpd
