#include "ucs/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ucs {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "kind", "N", "M", "R", "p", "rho", "snr_db", "sigma_x2", "trials",
      "seed", "se", "threads", "sensing_scale",
      "solver.xi", "solver.t_max", "solver.restarts", "solver.damping",
      "solver.llr_clamp", "solver.precision_floor", "solver.onsager_mean",
      "solver.onsager_precision",
  };
  return keys;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError,
                "invalid numeric value for key '" + key + "': " + v);
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError,
                "invalid integer value for key '" + key + "': " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::ConfigError,
              "invalid boolean value for key '" + key + "': " + v);
}

std::vector<int> int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v))
    out.push_back(static_cast<int>(parse_int(key, s)));
  if (out.empty())
    throw Error(ErrorCode::ConfigError, "empty list for key '" + key + "'");
  return out;
}

std::vector<double> double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
  if (out.empty())
    throw Error(ErrorCode::ConfigError, "empty list for key '" + key + "'");
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text) {
  ConfigMap cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError,
                  "config line " + std::to_string(lineno) +
                      " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ConfigError,
                  "empty key on config line " + std::to_string(lineno));
    cfg.values[key] = value;
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ConfigError, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

void ConfigMap::apply_overrides(const std::vector<std::string>& kv_pairs) {
  for (const auto& kv : kv_pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "--set expects key=value, got: " + kv);
    values[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
  }
}

ExperimentSpec build_spec(const ConfigMap& cfg) {
  for (const auto& [key, value] : cfg.values) {
    (void)value;
    if (!known_keys().count(key))
      throw Error(ErrorCode::ConfigError, "unknown config key: " + key);
  }
  ExperimentSpec spec;
  auto get = [&](const char* key) -> const std::string* {
    auto it = cfg.values.find(key);
    return it == cfg.values.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("kind")) {
    if (*v == "single") spec.kind = ExperimentKind::single;
    else if (*v == "snr_sweep") spec.kind = ExperimentKind::snr_sweep;
    else if (*v == "nm_grid") spec.kind = ExperimentKind::nm_grid;
    else if (*v == "sparsity_rank_grid") spec.kind = ExperimentKind::sparsity_rank_grid;
    else if (*v == "p_local") spec.kind = ExperimentKind::p_local;
    else
      throw Error(ErrorCode::ConfigError, "unknown experiment kind: " + *v);
  }
  if (const auto* v = get("N")) spec.N_list = int_list("N", *v);
  if (const auto* v = get("M")) spec.M_list = int_list("M", *v);
  if (const auto* v = get("R")) spec.R_list = int_list("R", *v);
  if (const auto* v = get("p")) spec.p_list = int_list("p", *v);
  if (const auto* v = get("rho")) spec.rho_list = double_list("rho", *v);
  if (const auto* v = get("snr_db")) spec.snr_db_list = double_list("snr_db", *v);
  if (const auto* v = get("sigma_x2")) spec.sigma_x2 = parse_double("sigma_x2", *v);
  if (const auto* v = get("trials"))
    spec.trials_per_cell = static_cast<int>(parse_int("trials", *v));
  if (const auto* v = get("seed"))
    spec.master_seed = static_cast<std::uint64_t>(parse_int("seed", *v));
  if (const auto* v = get("se")) spec.se_enabled = parse_bool("se", *v);
  if (const auto* v = get("threads"))
    spec.threads = static_cast<int>(parse_int("threads", *v));
  if (const auto* v = get("sensing_scale"))
    spec.sensing_scale = parse_double("sensing_scale", *v);
  if (const auto* v = get("solver.xi")) spec.solver.xi = parse_double("solver.xi", *v);
  if (const auto* v = get("solver.t_max"))
    spec.solver.t_max = static_cast<int>(parse_int("solver.t_max", *v));
  if (const auto* v = get("solver.restarts"))
    spec.solver.restarts = static_cast<int>(parse_int("solver.restarts", *v));
  if (const auto* v = get("solver.damping"))
    spec.solver.damping = parse_double("solver.damping", *v);
  if (const auto* v = get("solver.llr_clamp"))
    spec.solver.llr_clamp = parse_double("solver.llr_clamp", *v);
  if (const auto* v = get("solver.precision_floor"))
    spec.solver.precision_floor = parse_double("solver.precision_floor", *v);
  if (const auto* v = get("solver.onsager_mean"))
    spec.solver.onsager_mean = parse_bool("solver.onsager_mean", *v);
  if (const auto* v = get("solver.onsager_precision"))
    spec.solver.onsager_precision = parse_bool("solver.onsager_precision", *v);

  if (spec.trials_per_cell < 1)
    throw Error(ErrorCode::ConfigError, "trials must be >= 1");
  validate_config(spec.solver);
  return spec;
}

std::string dump_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  auto join_i = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  auto join_d = [](const std::vector<double>& v) {
    std::string s;
    char buf[64];
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::isinf(v[i]))
        std::snprintf(buf, sizeof buf, "inf");
      else
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      s += (i ? "," : "") + std::string(buf);
    }
    return s;
  };
  out << "kind = " << experiment_kind_name(spec.kind) << "\n";
  out << "N = " << join_i(spec.N_list) << "\n";
  out << "M = " << join_i(spec.M_list) << "\n";
  out << "R = " << join_i(spec.R_list) << "\n";
  if (!spec.p_list.empty()) out << "p = " << join_i(spec.p_list) << "\n";
  out << "rho = " << join_d(spec.rho_list) << "\n";
  out << "snr_db = " << join_d(spec.snr_db_list) << "\n";
  out << "sigma_x2 = " << spec.sigma_x2 << "\n";
  out << "trials = " << spec.trials_per_cell << "\n";
  out << "seed = " << spec.master_seed << "\n";
  out << "se = " << (spec.se_enabled ? "true" : "false") << "\n";
  out << "threads = " << spec.threads << "\n";
  out << "sensing_scale = " << spec.sensing_scale << "\n";
  out << "solver.xi = " << spec.solver.xi << "\n";
  out << "solver.t_max = " << spec.solver.t_max << "\n";
  out << "solver.restarts = " << spec.solver.restarts << "\n";
  out << "solver.damping = " << spec.solver.damping << "\n";
  out << "solver.llr_clamp = " << spec.solver.llr_clamp << "\n";
  out << "solver.precision_floor = " << spec.solver.precision_floor << "\n";
  out << "solver.onsager_mean = " << (spec.solver.onsager_mean ? "true" : "false") << "\n";
  out << "solver.onsager_precision = "
      << (spec.solver.onsager_precision ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace ucs
