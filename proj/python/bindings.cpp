#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qdpd/dpd.hpp"
#include "qdpd/errors.hpp"
#include "qdpd/experiment.hpp"
#include "qdpd/feedback_sync.hpp"
#include "qdpd/pa_model.hpp"
#include "qdpd/qubit_sim.hpp"
#include "qdpd/signal_gen.hpp"

namespace py = pybind11;
using namespace qdpd;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

ComplexSignal to_signal(const CArray& a, double fs) {
  if (a.ndim() != 1) throw ParameterError("expected a 1-D complex array");
  return ComplexSignal(std::vector<cplx>(a.data(), a.data() + a.size()), fs);
}

CArray to_array(const std::vector<cplx>& v) {
  CArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

CArray to_array(const ComplexSignal& s) { return to_array(s.data()); }

// (K, L) array indexed [k-1, l].
CArray grid_to_array(const MpGrid& g) {
  CArray out({g.max_order(), g.memory_depth()});
  auto r = out.mutable_unchecked<2>();
  for (int k = 1; k <= g.max_order(); ++k) {
    for (int l = 0; l < g.memory_depth(); ++l) r(k - 1, l) = g.at(k, l);
  }
  return out;
}

MpGrid array_to_grid(const CArray& a) {
  if (a.ndim() != 2) throw ParameterError("expected a (K, L) complex array");
  auto r = a.unchecked<2>();
  MpGrid g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (int k = 1; k <= g.max_order(); ++k) {
    for (int l = 0; l < g.memory_depth(); ++l) g.at(k, l) = r(k - 1, l);
  }
  return g;
}

py::array_t<cplx> matrix_to_array(const Matrix2& m) {
  py::array_t<cplx> out({2, 2});
  auto r = out.mutable_unchecked<2>();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) r(i, j) = m(i, j);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multitone qubit drive predistortion: signal chain and qubit simulation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ResolutionError>(m, "ResolutionError", base.ptr());
  py::register_exception<SyncError>(m, "SyncError", base.ptr());
  py::register_exception<CalibrationError>(m, "CalibrationError", base.ptr());
  py::register_exception<IllConditionedError>(m, "IllConditionedError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::enum_<GateKind>(m, "GateKind")
      .value("X", GateKind::XpiPlus)
      .value("MINUS_X", GateKind::XpiMinus)
      .value("Y", GateKind::YpiPlus)
      .value("MINUS_Y", GateKind::YpiMinus)
      .value("IDLE", GateKind::Idle);
  py::enum_<BlockRule>(m, "BlockRule")
      .value("INVERSE_PAIR", BlockRule::InversePair)
      .value("INDEPENDENT_PI", BlockRule::IndependentPi);
  py::enum_<Arm>(m, "Arm").value("RAW", Arm::Raw).value("DPD", Arm::Dpd);

  py::class_<GatePulse>(m, "GatePulse")
      .def_readonly("kind", &GatePulse::kind)
      .def_readonly("amplitude", &GatePulse::amplitude)
      .def_readonly("phase", &GatePulse::phase)
      .def_readonly("duration", &GatePulse::duration)
      .def_readonly("start_time", &GatePulse::start_time);
  py::class_<QubitChannel>(m, "QubitChannel")
      .def_readonly("qubit_id", &QubitChannel::qubit_id)
      .def_readonly("freq_offset", &QubitChannel::freq_offset)
      .def_readonly("gates", &QubitChannel::gates)
      .def_property_readonly("duration", &QubitChannel::duration);

  m.def(
      "build_gate_sequence",
      [](std::uint64_t seed, int n_qubits, int n_sequences, double pulse_duration,
         double pi_amplitude, BlockRule rule) {
        SequenceOptions o;
        o.rng_seed = seed;
        o.n_qubits = n_qubits;
        o.n_sequences = n_sequences;
        o.pulse_duration = pulse_duration;
        o.pi_amplitude = pi_amplitude;
        o.block_rule = rule;
        return build_gate_sequence(o);
      },
      py::arg("seed") = 7, py::arg("n_qubits") = 4, py::arg("n_sequences") = 20,
      py::arg("pulse_duration") = 1.6e-6, py::arg("pi_amplitude") = 1.0,
      py::arg("block_rule") = BlockRule::InversePair);
  m.def(
      "baseband_of_channel",
      [](const QubitChannel& ch, double fs, double rabi) {
        return to_array(baseband_of_channel(ch, fs, rabi));
      },
      py::arg("channel"), py::arg("sample_rate"), py::arg("rabi_max"));
  m.def(
      "assemble_multitone_if",
      [](const std::vector<QubitChannel>& chs, double fs, double rabi) {
        return to_array(assemble_multitone_if(chs, fs, rabi).signal);
      },
      py::arg("channels"), py::arg("sample_rate"), py::arg("rabi_max"));
  m.def(
      "generate_mls",
      [](int order, std::uint32_t seed, int spc) { return generate_mls(order, seed, spc).chips; },
      py::arg("register_order"), py::arg("seed_state") = 1, py::arg("samples_per_chip") = 2);

  py::class_<PAParams>(m, "PAParams")
      .def(py::init<>())
      .def_static("default_device", &PAParams::default_device)
      .def_static("linear", &PAParams::linear, py::arg("gain_db") = 25.48)
      .def_readwrite("linear_gain_db", &PAParams::linear_gain_db)
      .def_readwrite("ltm_kappa", &PAParams::ltm_kappa)
      .def_readwrite("ltm_time_constant", &PAParams::ltm_time_constant)
      .def_readwrite("noise_floor_dbc", &PAParams::noise_floor_dbc)
      .def_readwrite("rng_seed", &PAParams::rng_seed)
      .def_property(
          "kernel", [](const PAParams& p) { return grid_to_array(p.nl_coeffs); },
          [](PAParams& p, const CArray& a) { p.nl_coeffs = array_to_grid(a); })
      .def_property_readonly("linear_gain", &PAParams::linear_gain);

  m.def(
      "apply_pa",
      [](const PAParams& p, const CArray& x, double fs) { return to_array(apply_pa(p, to_signal(x, fs))); },
      py::arg("params"), py::arg("x"), py::arg("sample_rate"));
  m.def(
      "am_curves",
      [](const PAParams& p, int n, double max_amplitude) {
        py::array_t<double> out({n, 3});
        auto r = out.mutable_unchecked<2>();
        const auto c = am_curves(p, n, max_amplitude);
        for (int i = 0; i < n; ++i) {
          r(i, 0) = c[static_cast<std::size_t>(i)].a_in;
          r(i, 1) = c[static_cast<std::size_t>(i)].a_out;
          r(i, 2) = c[static_cast<std::size_t>(i)].phase_deg;
        }
        return out;
      },
      py::arg("params"), py::arg("n_points") = 101, py::arg("max_amplitude") = 1.0);
  m.def(
      "measure_linear_gain",
      [](const PAParams& p, const CArray& probe, double fs) { return measure_linear_gain(p, to_signal(probe, fs)); },
      py::arg("params"), py::arg("probe"), py::arg("sample_rate"));

  py::class_<SyncResult>(m, "SyncResult")
      .def_readonly("delay_samples", &SyncResult::delay_samples)
      .def_readonly("complex_gain", &SyncResult::complex_gain)
      .def_readonly("peak_metric", &SyncResult::peak_metric);
  m.def(
      "estimate_alignment",
      [](const CArray& ref, const CArray& rx, std::size_t preamble_len, int factor, double min_peak_db) {
        SyncOptions o;
        o.preamble_len = preamble_len;
        o.upsample_factor = factor;
        o.min_peak_db = min_peak_db;
        return estimate_alignment(to_signal(ref, 1.0), to_signal(rx, 1.0), o);
      },
      py::arg("reference"), py::arg("received"), py::arg("preamble_len"),
      py::arg("upsample_factor") = 10, py::arg("min_peak_db") = 6.0);

  py::class_<MPConfig>(m, "MPConfig")
      .def(py::init([](int K, int L, double reg, bool fallback) {
             MPConfig c;
             c.K = K;
             c.L = L;
             c.regularization = reg;
             c.ridge_fallback = fallback;
             return c;
           }),
           py::arg("K") = 5, py::arg("L") = 6, py::arg("regularization") = 0.0,
           py::arg("ridge_fallback") = false)
      .def_readwrite("K", &MPConfig::K)
      .def_readwrite("L", &MPConfig::L)
      .def_readwrite("regularization", &MPConfig::regularization)
      .def_readwrite("ridge_fallback", &MPConfig::ridge_fallback);
  m.def(
      "identify_postinverse",
      [](const CArray& pa_in, const CArray& pa_out, const MPConfig& c) {
        const auto id = identify_postinverse(to_signal(pa_in, 1.0), to_signal(pa_out, 1.0), c);
        py::dict d;
        d["coeffs"] = grid_to_array(id.coeffs);
        d["residual_mse"] = id.residual_mse;
        d["condition"] = id.condition;
        d["ridge"] = id.ridge;
        return d;
      },
      py::arg("pa_in"), py::arg("pa_out_aligned"), py::arg("config") = MPConfig{});
  m.def(
      "apply_mp",
      [](const CArray& x, const CArray& coeffs) {
        return to_array(apply_mp(to_signal(x, 1.0), array_to_grid(coeffs)));
      },
      py::arg("x"), py::arg("coeffs"));

  m.def(
      "evolve",
      [](const CArray& s, double fs, double rabi, int substeps, std::pair<cplx, cplx> initial) {
        EvolveOptions o;
        o.substeps = substeps;
        o.initial = {initial.first, initial.second};
        const auto ev = evolve(to_signal(s, fs), rabi, o);
        py::array_t<double> traj({static_cast<py::ssize_t>(ev.trajectory.size()), py::ssize_t{3}});
        auto r = traj.mutable_unchecked<2>();
        for (std::size_t i = 0; i < ev.trajectory.size(); ++i) {
          const auto& p = ev.trajectory[i];
          r(static_cast<py::ssize_t>(i), 0) = p.x;
          r(static_cast<py::ssize_t>(i), 1) = p.y;
          r(static_cast<py::ssize_t>(i), 2) = p.z;
        }
        return py::make_tuple(matrix_to_array(ev.unitary),
                              py::make_tuple(ev.final_state.alpha, ev.final_state.beta), traj);
      },
      py::arg("s_bb"), py::arg("sample_rate"), py::arg("rabi_max"), py::arg("substeps") = 1,
      py::arg("initial") = std::pair<cplx, cplx>{1.0, 0.0});
  m.def(
      "fidelity",
      [](std::pair<cplx, cplx> a, std::pair<cplx, cplx> b) {
        return fidelity({a.first, a.second}, {b.first, b.second});
      },
      py::arg("psi"), py::arg("psi_ref"));
  m.def(
      "downconvert_channel",
      [](const CArray& x, double fs, double f, double bandwidth, bool calibrate) {
        DownconvertOptions o;
        o.bandwidth = bandwidth;
        o.calibrate = calibrate;
        return to_array(downconvert_channel(to_signal(x, fs), f, o));
      },
      py::arg("if_signal"), py::arg("sample_rate"), py::arg("freq_offset"),
      py::arg("bandwidth") = 4e6, py::arg("calibrate") = true);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("parse", &parse_config)
      .def_static("load", &load_config)
      .def("format", &format_config)
      .def("validate", &ExperimentConfig::validate)
      .def_readwrite("rng_seed", &ExperimentConfig::rng_seed)
      .def_readwrite("n_qubits", &ExperimentConfig::n_qubits)
      .def_readwrite("tone_offsets", &ExperimentConfig::tone_offsets)
      .def_readwrite("pulse_duration", &ExperimentConfig::pulse_duration)
      .def_readwrite("n_training_sequences", &ExperimentConfig::n_training_sequences)
      .def_readwrite("n_eval_sequences", &ExperimentConfig::n_eval_sequences)
      .def_readwrite("power_levels_db", &ExperimentConfig::power_levels_db)
      .def_readwrite("n_repetitions", &ExperimentConfig::n_repetitions)
      .def_readwrite("mp", &ExperimentConfig::mp)
      .def_readwrite("pa", &ExperimentConfig::pa)
      .def_readwrite("sample_rate", &ExperimentConfig::sample_rate)
      .def_readwrite("substeps", &ExperimentConfig::substeps)
      .def_readwrite("pa_drive", &ExperimentConfig::pa_drive)
      .def_readwrite("block_rule", &ExperimentConfig::block_rule)
      .def_readwrite("sequence_level_db", &ExperimentConfig::sequence_level_db)
      .def_readwrite("trajectory_sequence", &ExperimentConfig::trajectory_sequence)
      .def_readwrite("run_raw", &ExperimentConfig::run_raw)
      .def_readwrite("run_dpd", &ExperimentConfig::run_dpd)
      .def_readwrite("jobs", &ExperimentConfig::jobs);

  m.def(
      "run_sequence_experiment",
      [](const ExperimentConfig& c, std::optional<std::filesystem::path> out_dir) {
        SequenceReport r;
        {
          py::gil_scoped_release release;
          r = run_sequence_experiment(c);
          if (out_dir) emit_sequence_reports(r, *out_dir);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          rows.append(py::make_tuple(arm_name(row.arm), row.qubit_id, row.sequence_index, row.fidelity));
        }
        py::dict metrics;
        for (const auto& [arm, mt] : r.metrics) {
          py::dict d;
          d["nmse_db"] = mt.nmse_db;
          py::list ch;
          for (const auto& c : mt.channels) ch.append(py::make_tuple(c.qubit_id, c.delta_a, c.leakage_db));
          d["channels"] = ch;
          metrics[arm_name(arm)] = d;
        }
        py::dict out;
        out["fidelity"] = rows;
        out["metrics"] = metrics;
        out["coeffs"] = grid_to_array(r.identification.coeffs);
        return out;
      },
      py::arg("config"), py::arg("out_dir") = std::nullopt);
  m.def(
      "run_power_sweep",
      [](const ExperimentConfig& c, std::optional<std::filesystem::path> out_dir) {
        SweepReport r;
        {
          py::gil_scoped_release release;
          r = run_power_sweep(c);
          if (out_dir) emit_reports(r, *out_dir);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["qubit"] = row.qubit_id;
          d["power_db"] = row.power_db;
          d["arm"] = arm_name(row.arm);
          d["mean_infidelity"] = row.mean_infidelity;
          d["std"] = row.std;
          d["nmse_db"] = row.nmse_db;
          d["delta_a"] = row.delta_a;
          d["leakage_db"] = row.leakage_db;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"), py::arg("out_dir") = std::nullopt);
}
