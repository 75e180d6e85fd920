#pragma once

// Batch commands behind the CLI: analyze a study table, simulate one drawn
// table, run a sweep, write fixtures. Each writes its files into `out_dir`
// and returns the JSON document it wrote (or a summary of the files).

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metasurf/io/config.hpp"
#include "metasurf/io/csv.hpp"
#include "metasurf/io/fixtures.hpp"
#include "metasurf/io/svg.hpp"
#include "metasurf/pooling.hpp"
#include "metasurf/response_surface.hpp"
#include "metasurf/simulation.hpp"

namespace metasurf::io {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace detail {

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
  os << s;
  if (!os) throw Error(ErrorCode::IoError, "write failed for '" + p.string() + "'");
}

inline void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + d.string() + "': " + ec.message());
}

inline ojson ci_json(const ConfidenceInterval& ci) { return ojson::array({ci.lower, ci.upper}); }

inline ojson outcome_json(const MethodOutcome& o) {
  ojson j;
  j["label"] = o.label;
  j["method"] = method_key(o.method);
  if (o.ok()) {
    j["status"] = "ok";
    j["estimate"] = *o.estimate;
    j["se"] = *o.se;
    j["ci"] = ci_json(*o.ci);
    j["tau2"] = o.tau2;
  } else {
    j["status"] = "failed";
    j["estimate"] = nullptr;
    j["se"] = nullptr;
    j["ci"] = nullptr;
    j["reason"] = o.failure->message;
    j["error"] = to_string(o.failure->code);
  }
  return j;
}

inline ojson prediction_json(const PredictionResult& p) {
  ojson j;
  j["estimate"] = p.estimate;
  j["se"] = p.se;
  j["ci"] = ci_json(p.ci);
  j["method"] = p.method;
  j["tau2"] = p.tau2;
  return j;
}

inline ojson quality_json(const DesignQuality& q) {
  if (q.is_numeric()) return q.score();
  return q.level().name();
}

}  // namespace detail

inline ojson comparison_json(const MethodComparison& c) {
  ojson j;
  j["threshold"] = c.threshold;
  j["strict"] = c.strict;
  j["methods"] = ojson::array();
  for (const auto& o : c.outcomes) j["methods"].push_back(detail::outcome_json(o));
  return j;
}

struct AnalyzeResult {
  ojson report;
  MethodComparison comparison;
  std::vector<SensitivityVariant> sensitivity;
  std::vector<std::string> warnings;
};

inline AnalyzeResult analyze_table(const StudyTable& t, const AnalyzeConfig& cfg) {
  std::optional<IdealPoint> ideal;
  if (t.kind() == QualityKind::Numeric) {
    if (!cfg.ideal_value) throw Error(ErrorCode::ConfigError, "numeric quality needs 'ideal_value'");
    ideal = IdealPoint::numeric(*cfg.ideal_value);
  } else {
    if (cfg.ideal_value) throw Error(ErrorCode::ConfigError, "'ideal_value' given for an ordinal table");
    ideal = IdealPoint::ordinal(t.scale());
  }
  const Encoding enc = cfg.encoding.value_or(t.kind() == QualityKind::Numeric ? Encoding::NumericLinear
                                                                               : Encoding::OrdinalIndicator);
  if (!encoding_accepts(enc, t.kind()))
    throw Error(ErrorCode::EncodingMismatch, std::string(to_string(enc)) + " does not fit this table's quality kind");

  AnalyzeResult r;
  r.comparison = compare_methods(t, *ideal, enc, CompareOptions{cfg.threshold, cfg.strict, cfg.methods});
  if (auto w = extrapolation_warning(t, *ideal)) r.warnings.push_back(*w);

  ojson rep;
  rep["input"] = cfg.input;
  rep["k"] = t.size();
  rep["quality_kind"] = t.kind() == QualityKind::Numeric ? "numeric" : "ordinal";
  if (t.kind() == QualityKind::Ordinal) {
    rep["scale"] = {{"levels", t.scale()->levels()}, {"ideal", t.scale()->ideal_level()}};
    rep["ideal"] = t.scale()->ideal_level();
  } else {
    rep["ideal"] = *cfg.ideal_value;
  }
  rep["encoding"] = to_string(enc);
  rep["comparison"] = comparison_json(r.comparison);

  if (t.kind() == QualityKind::Ordinal) {
    r.sensitivity = sensitivity_analysis(t, *ideal);
    ojson sens = ojson::array();
    for (const auto& v : r.sensitivity) {
      ojson e;
      e["label"] = v.label;
      if (v.result) {
        e["status"] = "ok";
        e["result"] = detail::prediction_json(*v.result);
      } else {
        e["status"] = "failed";
        e["result"] = nullptr;
        e["reason"] = v.failure->message;
      }
      sens.push_back(e);
    }
    rep["sensitivity"] = sens;
  }

  ojson diag;
  const auto fe = fixed_effect_pool(t);
  diag["q_stat"] = fe.q_stat;
  diag["i_squared_diagnostic"] = fe.i_squared();
  if (t.size() >= 2) {
    diag["tau2_dl"] = dl_tau_squared(t);
  } else {
    diag["tau2_dl"] = nullptr;
    diag["tau2_dl_reason"] = "needs at least two studies";
  }
  if (const auto* rsr = r.comparison.find(Method::RSR); rsr && rsr->ok()) {
    diag["tau2_metareg"] = rsr->tau2;
  } else {
    diag["tau2_metareg"] = nullptr;
    diag["tau2_metareg_reason"] = rsr ? rsr->failure->message : "RSR not requested";
  }
  diag["warnings"] = r.warnings;
  rep["diagnostics"] = diag;

  ojson studies = ojson::array();
  for (const auto& s : t)
    studies.push_back({{"id", s.id}, {"effect", s.effect}, {"se", s.se}, {"quality", detail::quality_json(s.quality)}});
  rep["studies"] = studies;
  r.report = std::move(rep);
  return r;
}

inline AnalyzeResult cmd_analyze(const AnalyzeConfig& cfg, const fs::path& out_dir, bool plots) {
  const auto in = ingest(cfg.input, cfg.scale);
  auto r = analyze_table(in.table, cfg);
  detail::ensure_dir(out_dir);
  detail::write_text(out_dir / "report.json", r.report.dump(2) + "\n");
  if (plots) {
    detail::write_text(out_dir / "forest.svg", forest_plot(in.table, r.comparison));
    detail::write_text(out_dir / "quality_scatter.svg", quality_scatter(in.table));
  }
  return r;
}

struct SimulateResult {
  ojson report;
  StudyTable table;
  MethodComparison comparison;
};

inline SimulateResult cmd_simulate(const SimulateConfig& cfg, const fs::path& out_dir, bool plots) {
  auto rng = seed_stream(cfg.master_seed, cfg.params, cfg.rep_index);
  auto table = sample_studies(cfg.params, rng);
  auto cmp = compare_methods(table, IdealPoint::numeric(cfg.params.z_max), Encoding::NumericLinear,
                             CompareOptions{cfg.run.threshold, cfg.run.strict, cfg.run.methods});
  ojson rep;
  const auto& p = cfg.params;
  rep["params"] = {{"tau", p.tau},       {"alpha", p.alpha},     {"beta", p.beta},     {"gamma", p.gamma},
                   {"delta", p.delta},   {"n", p.n},             {"z_max", p.z_max},   {"se_floor", p.se_floor},
                   {"eps_sd", p.eps_sd}, {"psi_sd", p.psi_sd}};
  rep["master_seed"] = cfg.master_seed;
  rep["rep_index"] = cfg.rep_index;
  rep["comparison"] = comparison_json(cmp);
  ojson covered = ojson::object();
  for (const auto& o : cmp.outcomes) covered[o.label] = o.ok() ? ojson(o.ci->contains(p.tau)) : ojson(nullptr);
  rep["covers_tau"] = covered;

  detail::ensure_dir(out_dir);
  detail::write_text(out_dir / "comparison.json", rep.dump(2) + "\n");
  std::ostringstream csv;
  write_study_csv(csv, table);
  detail::write_text(out_dir / "studies.csv", csv.str());
  if (plots) {
    detail::write_text(out_dir / "comparison.svg", comparison_plot(cmp, p.tau));
    detail::write_text(out_dir / "quality_scatter.svg", quality_scatter(table));
  }
  return {std::move(rep), std::move(table), std::move(cmp)};
}

inline SweepGrid cmd_sweep(const SweepConfig& cfg, const fs::path& out_dir, bool plots, unsigned threads) {
  auto grid = run_sweep(cfg.spec, threads);
  detail::ensure_dir(out_dir);
  std::ostringstream csv;
  write_sweep_csv(csv, grid);
  detail::write_text(out_dir / "sweep.csv", csv.str());
  if (cfg.detail) {
    std::ostringstream d;
    write_sweep_detail_csv(d, grid);
    detail::write_text(out_dir / "sweep_detail.csv", d.str());
  }
  if (plots) {
    for (int n : cfg.spec.n_grid)
      for (Method m : cfg.spec.methods) {
        const std::string suffix = std::string(method_key(m)) + "_n" + std::to_string(n) + ".svg";
        detail::write_text(out_dir / ("bias_" + suffix), heatgrid(grid, m, GridMetric::MedianBias, n));
        detail::write_text(out_dir / ("coverage_" + suffix), heatgrid(grid, m, GridMetric::Coverage, n));
      }
  }
  return grid;
}

/// Writes the bundled risk-of-bias table and one simulated numeric table.
inline std::vector<fs::path> cmd_fixtures(const fs::path& out_dir, std::uint64_t seed) {
  detail::ensure_dir(out_dir);
  std::vector<fs::path> written;
  {
    std::ostringstream os;
    write_study_csv(os, rob_fixture());
    written.push_back(out_dir / "rob_fixture.csv");
    detail::write_text(written.back(), os.str());
  }
  {
    ScenarioParams p;
    auto rng = seed_stream(seed, p, 0);
    std::ostringstream os;
    write_study_csv(os, sample_studies(p, rng));
    written.push_back(out_dir / "numeric_fixture.csv");
    detail::write_text(written.back(), os.str());
  }
  return written;
}

}  // namespace metasurf::io
