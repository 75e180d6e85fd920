#pragma once

// JSON run configuration. Unknown keys are rejected at every level.
//
// analyze:  {"mode": "analyze", "input": "studies.csv",
//            "scale": {"levels": ["high", "unclear", "low"], "ideal": "low"}
//              | "ideal_value": 10,
//            "encoding": "numeric_linear" | "ordinal_indicator" | "ordinal_numeric",
//            "methods": ["FE", "RE", "FEt", "REt", "RSF", "RSR"],
//            "threshold": 9, "strict": true, "output": "out", "plots": false}
// simulate: {"mode": "simulate", "params": {...}, "master_seed": 1, "rep_index": 0,
//            "methods": [...], "threshold": 9, "strict": true, "output": "out", "plots": false}
// sweep:    {"mode": "sweep", "params": {...}, "grid": {"alpha": [...], "gamma": [...],
//            "delta": [...], "n": [...], "reps": 100}, "master_seed": 1, "methods": [...],
//            "threshold": 9, "strict": true, "threads": 1, "detail": false,
//            "output": "out", "plots": false}
// params keys: tau, alpha, beta, gamma, delta, n, z_max, se_floor, eps_sd, psi_sd.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metasurf/core.hpp"
#include "metasurf/metareg.hpp"
#include "metasurf/response_surface.hpp"
#include "metasurf/simulation.hpp"

namespace metasurf::io {

using json = nlohmann::json;

enum class Mode { Analyze, Simulate, Sweep };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Analyze: return "analyze";
    case Mode::Simulate: return "simulate";
    case Mode::Sweep: return "sweep";
  }
  return "?";
}

struct AnalyzeConfig {
  std::string input;
  std::optional<OrdinalScale> scale;
  std::optional<double> ideal_value;
  std::optional<Encoding> encoding;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  double threshold = 9.0;
  bool strict = true;
};

struct SimulateConfig {
  ScenarioParams params;
  std::uint64_t master_seed = 0;
  std::uint64_t rep_index = 0;
  RunOptions run;
};

struct SweepConfig {
  SweepSpec spec;
  unsigned threads = 1;
  bool detail = false;
};

struct RunConfig {
  Mode mode = Mode::Analyze;
  AnalyzeConfig analyze;
  SimulateConfig simulate;
  SweepConfig sweep;
  std::string output = "out";
  bool plots = false;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

inline void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_fail(where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) config_fail("unknown key '" + k + "' in " + where);
}

inline double get_real(const json& j, const std::string& key) {
  if (!j.is_number()) config_fail("'" + key + "' must be a number");
  return j.get<double>();
}

inline std::int64_t get_int(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) config_fail("'" + key + "' must be an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t get_u64(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  config_fail("'" + key + "' must be a nonnegative integer");
}

inline bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) config_fail("'" + key + "' must be true or false");
  return j.get<bool>();
}

inline std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) config_fail("'" + key + "' must be a string");
  return j.get<std::string>();
}

template <class T, class F>
std::vector<T> get_list(const json& j, const std::string& key, F&& each) {
  if (!j.is_array() || j.empty()) config_fail("'" + key + "' must be a nonempty array");
  std::vector<T> out;
  for (const auto& e : j) out.push_back(each(e, key));
  return out;
}

inline std::vector<Method> get_methods(const json& j) {
  return get_list<Method>(j, "methods", [](const json& e, const std::string& k) {
    try {
      return parse_method(get_string(e, k));
    } catch (const Error& err) {
      config_fail(err.what());
    }
  });
}

inline void read_params(const json& j, ScenarioParams& p) {
  only_keys(j, {"tau", "alpha", "beta", "gamma", "delta", "n", "z_max", "se_floor", "eps_sd", "psi_sd"}, "params");
  for (const auto& [k, v] : j.items()) {
    if (k == "tau") p.tau = get_real(v, k);
    else if (k == "alpha") p.alpha = get_real(v, k);
    else if (k == "beta") p.beta = get_real(v, k);
    else if (k == "gamma") p.gamma = get_real(v, k);
    else if (k == "delta") p.delta = get_real(v, k);
    else if (k == "n") p.n = static_cast<int>(get_int(v, k));
    else if (k == "z_max") p.z_max = get_real(v, k);
    else if (k == "se_floor") p.se_floor = get_real(v, k);
    else if (k == "eps_sd") p.eps_sd = get_real(v, k);
    else if (k == "psi_sd") p.psi_sd = get_real(v, k);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    config_fail(e.what());
  }
}

}  // namespace detail

/// Validates and decodes a configuration document. Relative input paths are
/// resolved against `base_dir`.
inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  if (!j.is_object()) config_fail("config must be a JSON object");
  if (!j.contains("mode")) config_fail("missing 'mode'");
  RunConfig c;
  const auto mode = get_string(j.at("mode"), "mode");
  const std::set<std::string> common = {"mode", "output", "plots", "methods", "threshold", "strict"};
  auto with = [&](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    return extra;
  };
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  double threshold = 9.0;
  bool strict = true;
  if (mode == "analyze") {
    c.mode = Mode::Analyze;
    only_keys(j, with({"input", "scale", "ideal_value", "encoding"}), "config");
  } else if (mode == "simulate") {
    c.mode = Mode::Simulate;
    only_keys(j, with({"params", "master_seed", "rep_index"}), "config");
  } else if (mode == "sweep") {
    c.mode = Mode::Sweep;
    only_keys(j, with({"params", "grid", "master_seed", "threads", "detail"}), "config");
  } else {
    config_fail("unknown mode '" + mode + "'");
  }
  if (j.contains("output")) c.output = get_string(j.at("output"), "output");
  if (j.contains("plots")) c.plots = get_bool(j.at("plots"), "plots");
  if (j.contains("methods")) methods = get_methods(j.at("methods"));
  if (j.contains("threshold")) threshold = get_real(j.at("threshold"), "threshold");
  if (j.contains("strict")) strict = get_bool(j.at("strict"), "strict");

  switch (c.mode) {
    case Mode::Analyze: {
      auto& a = c.analyze;
      if (!j.contains("input")) config_fail("analyze needs 'input'");
      std::filesystem::path in = get_string(j.at("input"), "input");
      if (in.is_relative() && !base_dir.empty()) in = base_dir / in;
      a.input = in.string();
      if (j.contains("scale") && j.contains("ideal_value")) config_fail("give either 'scale' or 'ideal_value', not both");
      if (j.contains("scale")) {
        const auto& s = j.at("scale");
        only_keys(s, {"levels", "ideal"}, "scale");
        if (!s.contains("levels") || !s.contains("ideal")) config_fail("scale needs 'levels' and 'ideal'");
        auto levels = get_list<std::string>(s.at("levels"), "levels", get_string);
        try {
          a.scale = OrdinalScale(std::move(levels), get_string(s.at("ideal"), "ideal"));
        } catch (const Error& e) {
          config_fail(e.what());
        }
      }
      if (j.contains("ideal_value")) a.ideal_value = get_real(j.at("ideal_value"), "ideal_value");
      if (j.contains("encoding")) {
        try {
          a.encoding = parse_encoding(get_string(j.at("encoding"), "encoding"));
        } catch (const Error& e) {
          config_fail(e.what());
        }
      }
      a.methods = methods;
      a.threshold = threshold;
      a.strict = strict;
      break;
    }
    case Mode::Simulate: {
      auto& s = c.simulate;
      if (j.contains("params")) read_params(j.at("params"), s.params);
      if (j.contains("master_seed")) s.master_seed = get_u64(j.at("master_seed"), "master_seed");
      if (j.contains("rep_index")) s.rep_index = get_u64(j.at("rep_index"), "rep_index");
      s.run = RunOptions{methods, threshold, strict};
      break;
    }
    case Mode::Sweep: {
      auto& w = c.sweep;
      if (j.contains("params")) read_params(j.at("params"), w.spec.base);
      if (j.contains("grid")) {
        const auto& g = j.at("grid");
        only_keys(g, {"alpha", "gamma", "delta", "n", "reps"}, "grid");
        if (g.contains("alpha")) w.spec.alpha_grid = get_list<double>(g.at("alpha"), "alpha", get_real);
        if (g.contains("gamma")) w.spec.gamma_grid = get_list<double>(g.at("gamma"), "gamma", get_real);
        if (g.contains("delta")) w.spec.delta_grid = get_list<double>(g.at("delta"), "delta", get_real);
        if (g.contains("n"))
          w.spec.n_grid = get_list<int>(g.at("n"), "n", [](const json& e, const std::string& k) {
            return static_cast<int>(get_int(e, k));
          });
        if (g.contains("reps")) {
          const auto r = get_int(g.at("reps"), "reps");
          if (r < 1) config_fail("'reps' must be >= 1");
          w.spec.reps = static_cast<std::size_t>(r);
        }
      }
      if (j.contains("master_seed")) w.spec.master_seed = get_u64(j.at("master_seed"), "master_seed");
      if (j.contains("threads")) w.threads = static_cast<unsigned>(get_u64(j.at("threads"), "threads"));
      if (j.contains("detail")) w.detail = get_bool(j.at("detail"), "detail");
      w.spec.methods = methods;
      w.spec.threshold = threshold;
      w.spec.strict = strict;
      w.spec.keep_records = w.detail;
      try {
        w.spec.validate();
        for (const auto& cell : w.spec.cells()) cell.validate();
      } catch (const Error& e) {
        config_fail(e.what());
      }
      break;
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

}  // namespace metasurf::io
