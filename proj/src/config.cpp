#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "qdpd/errors.hpp"
#include "qdpd/experiment.hpp"
#include "qdpd/format.hpp"

namespace qdpd {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("config key " + key + ": '" + text + "' is not a number");
  }
}

long long to_int(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("config key " + key + ": '" + text + "' is not an integer");
  }
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ParameterError("config key " + key + ": '" + text + "' is not a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

// "k,l,re,im; k,l,re,im; ..." with 1-based odd/even orders and 0-based lags.
MpGrid to_kernel(const std::string& key, const std::string& text) {
  if (text == "default") return PAParams::default_device().nl_coeffs;
  if (text == "linear") return MpGrid::identity(1, 1);
  struct Entry {
    int k, l;
    cplx c;
  };
  std::vector<Entry> entries;
  int K = 0, L = 0;
  for (const auto& term : split(text, ';')) {
    const auto f = split(term, ',');
    if (f.size() != 4) throw ParameterError("config key " + key + ": bad kernel term '" + term + "'");
    Entry e{static_cast<int>(to_int(key, f[0])), static_cast<int>(to_int(key, f[1])),
            {to_double(key, f[2]), to_double(key, f[3])}};
    if (e.k < 1 || e.l < 0) throw ParameterError("config key " + key + ": bad kernel index");
    K = std::max(K, e.k);
    L = std::max(L, e.l + 1);
    entries.push_back(e);
  }
  if (entries.empty()) throw ParameterError("config key " + key + ": empty kernel");
  MpGrid grid(K, L);
  for (const auto& e : entries) grid.at(e.k, e.l) = e.c;
  return grid;
}

std::string kernel_text(const MpGrid& grid) {
  std::string s;
  for (int l = 0; l < grid.memory_depth(); ++l) {
    for (int k = 1; k <= grid.max_order(); ++k) {
      const cplx c = grid.at(k, l);
      if (c == cplx{}) continue;
      if (!s.empty()) s += "; ";
      s += std::to_string(k) + "," + std::to_string(l) + "," + fmt_double(c.real()) + "," +
           fmt_double(c.imag());
    }
  }
  return s;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) {
    seen_.insert(section + "." + key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <class F>
  void read(const std::string& section, const std::string& key, F&& apply) {
    if (auto v = get(section, key)) apply(section + "." + key, *v);
  }

  void check_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        throw ParameterError("config key '" + section + "' is outside any section");
      }
      for (const auto& [key, value] : body) {
        if (!seen_.count(section + "." + key)) {
          throw ParameterError("unknown config key " + section + "." + key);
        }
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError(std::string("config parse error: ") + e.what());
  }

  ExperimentConfig c;
  Reader r(tree);
  const auto D = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); };
  };
  const auto I = [](int& dst) {
    return [&dst](const std::string& k, const std::string& v) {
      dst = static_cast<int>(to_int(k, v));
    };
  };

  r.read("experiment", "seed", [&](const std::string& k, const std::string& v) {
    c.rng_seed = static_cast<std::uint64_t>(to_int(k, v));
  });
  r.read("experiment", "n_qubits", I(c.n_qubits));
  r.read("experiment", "tone_offsets_hz", [&](const std::string& k, const std::string& v) {
    c.tone_offsets = v == "default" ? std::vector<double>{} : to_list(k, v);
  });
  r.read("experiment", "pulse_duration_s", D(c.pulse_duration));
  r.read("experiment", "n_training_sequences", I(c.n_training_sequences));
  r.read("experiment", "n_eval_sequences", I(c.n_eval_sequences));
  r.read("experiment", "power_levels_db", [&](const std::string& k, const std::string& v) {
    c.power_levels_db = to_list(k, v);
  });
  r.read("experiment", "n_repetitions", I(c.n_repetitions));
  r.read("experiment", "sample_rate_hz", D(c.sample_rate));
  r.read("experiment", "substeps", I(c.substeps));
  r.read("experiment", "pa_drive", D(c.pa_drive));
  r.read("experiment", "block_rule", [&](const std::string& k, const std::string& v) {
    if (v == "inverse_pair") c.block_rule = BlockRule::InversePair;
    else if (v == "independent") c.block_rule = BlockRule::IndependentPi;
    else throw ParameterError("config key " + k + ": expected inverse_pair or independent");
  });
  r.read("experiment", "sequence_level_db", D(c.sequence_level_db));
  r.read("experiment", "trajectory_sequence", I(c.trajectory_sequence));
  r.read("experiment", "run_raw", [&](const std::string& k, const std::string& v) {
    c.run_raw = to_bool(k, v);
  });
  r.read("experiment", "run_dpd", [&](const std::string& k, const std::string& v) {
    c.run_dpd = to_bool(k, v);
  });
  r.read("experiment", "jobs", I(c.jobs));

  r.read("dpd", "K", I(c.mp.K));
  r.read("dpd", "L", I(c.mp.L));
  r.read("dpd", "regularization", D(c.mp.regularization));
  r.read("dpd", "ridge_fallback", [&](const std::string& k, const std::string& v) {
    c.mp.ridge_fallback = to_bool(k, v);
  });
  r.read("dpd", "max_condition", D(c.mp.max_condition));

  r.read("pa", "linear_gain_db", D(c.pa.linear_gain_db));
  r.read("pa", "kernel", [&](const std::string& k, const std::string& v) {
    c.pa.nl_coeffs = to_kernel(k, v);
  });
  r.read("pa", "ltm_kappa", D(c.pa.ltm_kappa));
  r.read("pa", "ltm_time_constant_s", D(c.pa.ltm_time_constant));
  r.read("pa", "noise_floor_dbc", [&](const std::string& k, const std::string& v) {
    if (v == "off") c.pa.noise_floor_dbc.reset();
    else c.pa.noise_floor_dbc = to_double(k, v);
  });

  r.read("sync", "mls_order", I(c.mls_order));
  r.read("sync", "mls_seed", [&](const std::string& k, const std::string& v) {
    c.mls_seed = static_cast<std::uint32_t>(to_int(k, v));
  });
  r.read("sync", "samples_per_chip", I(c.samples_per_chip));
  r.read("sync", "preamble_amplitude", D(c.preamble_amplitude));
  r.read("sync", "upsample_factor", I(c.upsample_factor));
  r.read("sync", "min_peak_db", D(c.min_peak_db));

  r.read("qubit", "bandwidth_hz", D(c.channel_bandwidth));
  r.read("qubit", "transition_hz", D(c.channel_transition));

  r.check_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[experiment]\n"
    << "seed = " << c.rng_seed << '\n'
    << "n_qubits = " << c.n_qubits << '\n'
    << "tone_offsets_hz = " << (c.tone_offsets.empty() ? "default" : list_text(c.tone_offsets))
    << '\n'
    << "pulse_duration_s = " << fmt_double(c.pulse_duration) << '\n'
    << "n_training_sequences = " << c.n_training_sequences << '\n'
    << "n_eval_sequences = " << c.n_eval_sequences << '\n'
    << "power_levels_db = " << list_text(c.power_levels_db) << '\n'
    << "n_repetitions = " << c.n_repetitions << '\n'
    << "sample_rate_hz = " << fmt_double(c.sample_rate) << '\n'
    << "substeps = " << c.substeps << '\n'
    << "pa_drive = " << fmt_double(c.pa_drive) << '\n'
    << "block_rule = "
    << (c.block_rule == BlockRule::InversePair ? "inverse_pair" : "independent") << '\n'
    << "sequence_level_db = " << fmt_double(c.sequence_level_db) << '\n'
    << "trajectory_sequence = " << c.trajectory_sequence << '\n'
    << "run_raw = " << (c.run_raw ? "true" : "false") << '\n'
    << "run_dpd = " << (c.run_dpd ? "true" : "false") << '\n'
    << "jobs = " << c.jobs << "\n\n"
    << "[dpd]\n"
    << "K = " << c.mp.K << '\n'
    << "L = " << c.mp.L << '\n'
    << "regularization = " << fmt_double(c.mp.regularization) << '\n'
    << "ridge_fallback = " << (c.mp.ridge_fallback ? "true" : "false") << '\n'
    << "max_condition = " << fmt_double(c.mp.max_condition) << "\n\n"
    << "[pa]\n"
    << "linear_gain_db = " << fmt_double(c.pa.linear_gain_db) << '\n'
    << "kernel = " << kernel_text(c.pa.nl_coeffs) << '\n'
    << "ltm_kappa = " << fmt_double(c.pa.ltm_kappa) << '\n'
    << "ltm_time_constant_s = " << fmt_double(c.pa.ltm_time_constant) << '\n'
    << "noise_floor_dbc = "
    << (c.pa.noise_floor_dbc ? fmt_double(*c.pa.noise_floor_dbc) : std::string("off")) << "\n\n"
    << "[sync]\n"
    << "mls_order = " << c.mls_order << '\n'
    << "mls_seed = " << c.mls_seed << '\n'
    << "samples_per_chip = " << c.samples_per_chip << '\n'
    << "preamble_amplitude = " << fmt_double(c.preamble_amplitude) << '\n'
    << "upsample_factor = " << c.upsample_factor << '\n'
    << "min_peak_db = " << fmt_double(c.min_peak_db) << "\n\n"
    << "[qubit]\n"
    << "bandwidth_hz = " << fmt_double(c.channel_bandwidth) << '\n'
    << "transition_hz = " << fmt_double(c.channel_transition) << '\n';
  return o.str();
}

}  // namespace qdpd
