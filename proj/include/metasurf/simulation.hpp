#pragma once

// Monte-Carlo engine: data-generating process, one-rep scenario runs, the
// factorial sweep and its median-bias / coverage aggregation.
//
// Every (cell, rep) draws from its own stream derived from the master seed,
// the cell's parameter values and the rep index, so results do not depend on
// the order or thread in which reps execute.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "metasurf/core.hpp"
#include "metasurf/random.hpp"
#include "metasurf/response_surface.hpp"

namespace metasurf {

struct ScenarioParams {
  double tau = 20.0;
  double alpha = 5.0;
  double beta = 2.0;
  double gamma = 2.0;
  double delta = 0.2;
  int n = 20;
  double z_max = 10.0;
  double se_floor = 0.1;
  double eps_sd = 0.1;  // sqrt of the 0.01 variance
  double psi_sd = 1.0;

  void validate() const {
    auto bad = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (!(alpha > 0.0) || !(beta > 0.0)) bad("alpha and beta must be > 0");
    if (!(gamma >= 0.0) || !(delta >= 0.0)) bad("gamma and delta must be >= 0");
    if (n < 2) bad("n must be >= 2");
    if (!(se_floor > 0.0)) bad("se_floor must be > 0");
    if (!(eps_sd > 0.0) || !(psi_sd > 0.0)) bad("eps_sd and psi_sd must be > 0");
    if (!std::isfinite(tau) || !std::isfinite(z_max)) bad("tau and z_max must be finite");
  }
};

/// Stream for one repetition of one cell.
inline Stream seed_stream(std::uint64_t master_seed, const ScenarioParams& cell, std::uint64_t rep_index) {
  return Stream(derive_seed(master_seed, {double_bits(cell.alpha), double_bits(cell.gamma), double_bits(cell.delta),
                                          static_cast<std::uint64_t>(cell.n), rep_index}));
}

/// Z_i ~ z_max * Beta(alpha, beta); psi_i ~ N(tau - gamma (z_max - Z_i), psi_sd);
/// s_i = max(delta (z_max - Z_i) + eps_i, se_floor), eps_i ~ N(0, eps_sd).
/// Per study the draw order is Z, psi, eps.
inline StudyTable sample_studies(const ScenarioParams& p, Stream& rng) {
  p.validate();
  std::vector<Study> studies;
  studies.reserve(static_cast<std::size_t>(p.n));
  for (int i = 0; i < p.n; ++i) {
    const double z = p.z_max * rng.beta(p.alpha, p.beta);
    const double psi = rng.normal(p.tau - p.gamma * (p.z_max - z), p.psi_sd);
    const double eps = rng.normal(0.0, p.eps_sd);
    const double s = std::max(p.delta * (p.z_max - z) + eps, p.se_floor);
    studies.push_back(Study{"s" + std::to_string(i + 1), psi, s, DesignQuality::numeric(z), {}});
  }
  return validate_table(std::move(studies));
}

struct MethodRecord {
  Method method;
  std::string label;
  bool failed = false;
  double estimate = 0.0;
  ConfidenceInterval ci;
  bool covered = false;
  double bias = 0.0;
  std::optional<ErrorCode> error;
};

struct RepRecord {
  std::uint64_t rep = 0;
  std::vector<MethodRecord> methods;
};

struct RunOptions {
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  double threshold = 9.0;
  bool strict = true;
};

inline RepRecord record_comparison(const MethodComparison& c, double tau, std::uint64_t rep) {
  RepRecord r;
  r.rep = rep;
  for (const auto& o : c.outcomes) {
    MethodRecord m;
    m.method = o.method;
    m.label = o.label;
    if (!o.ok()) {
      m.failed = true;
      m.error = o.failure->code;
    } else {
      m.estimate = *o.estimate;
      m.ci = *o.ci;
      m.covered = m.ci.contains(tau);
      m.bias = m.estimate - tau;
    }
    r.methods.push_back(std::move(m));
  }
  return r;
}

inline RepRecord run_scenario(const ScenarioParams& p, const RunOptions& opts, std::uint64_t rep_index,
                              std::uint64_t master_seed) {
  auto rng = seed_stream(master_seed, p, rep_index);
  const auto table = sample_studies(p, rng);
  const auto cmp = compare_methods(table, IdealPoint::numeric(p.z_max), Encoding::NumericLinear,
                                   CompareOptions{opts.threshold, opts.strict, opts.methods});
  return record_comparison(cmp, p.tau, rep_index);
}

struct Aggregate {
  std::optional<double> median_bias;
  std::optional<double> coverage;
  std::size_t n_failed = 0;
  std::size_t reps = 0;
};

/// Lower median: element (m - 1) / 2 of the sorted values.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "median of nothing");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Median bias and coverage over the non-failed records; failed records are
/// only counted.
inline Aggregate aggregate(std::span<const MethodRecord> records) {
  Aggregate a;
  a.reps = records.size();
  std::vector<double> biases;
  std::size_t covered = 0;
  for (const auto& r : records) {
    if (r.failed) {
      ++a.n_failed;
      continue;
    }
    biases.push_back(r.bias);
    if (r.covered) ++covered;
  }
  if (!biases.empty()) {
    a.coverage = static_cast<double>(covered) / static_cast<double>(biases.size());
    a.median_bias = lower_median(std::move(biases));
  }
  return a;
}

struct SweepSpec {
  std::vector<double> alpha_grid{2, 5, 8, 11};
  std::vector<double> gamma_grid{0, 1, 2, 4};
  std::vector<double> delta_grid{0, 0.1, 0.2, 0.4, 0.8};
  std::vector<int> n_grid{10, 20, 40, 80};
  std::size_t reps = 100;
  std::uint64_t master_seed = 0;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  double threshold = 9.0;
  bool strict = true;
  ScenarioParams base;  // tau, beta, z_max, se_floor, eps_sd, psi_sd
  bool keep_records = false;

  void validate() const {
    if (alpha_grid.empty() || gamma_grid.empty() || delta_grid.empty() || n_grid.empty())
      throw Error(ErrorCode::InvalidArgument, "sweep grids must be nonempty");
    if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no methods selected");
  }

  std::vector<ScenarioParams> cells() const {
    std::vector<ScenarioParams> out;
    for (double a : alpha_grid)
      for (double g : gamma_grid)
        for (double d : delta_grid)
          for (int n : n_grid) {
            auto p = base;
            p.alpha = a;
            p.gamma = g;
            p.delta = d;
            p.n = n;
            out.push_back(p);
          }
    return out;
  }
};

struct CellMethodResult {
  Method method;
  std::string label;
  Aggregate agg;
};

struct SweepCell {
  ScenarioParams params;
  std::vector<CellMethodResult> methods;
  std::vector<RepRecord> records;  // filled only when keep_records is set

  const CellMethodResult* find(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return &r;
    return nullptr;
  }
};

struct SweepGrid {
  std::vector<SweepCell> cells;
  double threshold = 9.0;

  const SweepCell* find(double alpha, double gamma, double delta, int n) const {
    for (const auto& c : cells)
      if (c.params.alpha == alpha && c.params.gamma == gamma && c.params.delta == delta && c.params.n == n)
        return &c;
    return nullptr;
  }
};

/// Full factorial sweep. threads <= 1 runs serially; the output is identical
/// for any thread count.
inline SweepGrid run_sweep(const SweepSpec& spec, unsigned threads = 1) {
  spec.validate();
  const auto cells = spec.cells();
  for (const auto& c : cells) c.validate();
  const RunOptions opts{spec.methods, spec.threshold, spec.strict};
  const std::size_t n_tasks = cells.size() * spec.reps;
  std::vector<RepRecord> records(n_tasks);

  auto work = [&](std::size_t task) {
    const auto cell = task / spec.reps;
    const auto rep = task % spec.reps;
    records[task] = run_scenario(cells[cell], opts, rep, spec.master_seed);
  };

  if (threads <= 1 || n_tasks < 2) {
    for (std::size_t t = 0; t < n_tasks; ++t) work(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto width = std::min<std::size_t>(threads, n_tasks);
    pool.reserve(width);
    for (std::size_t w = 0; w < width; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) work(t);
      });
    for (auto& th : pool) th.join();
  }

  SweepGrid grid;
  grid.threshold = spec.threshold;
  grid.cells.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    SweepCell cell;
    cell.params = cells[c];
    const auto first = records.begin() + static_cast<std::ptrdiff_t>(c * spec.reps);
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
      std::vector<MethodRecord> per_method;
      per_method.reserve(spec.reps);
      for (auto it = first; it != first + static_cast<std::ptrdiff_t>(spec.reps); ++it)
        per_method.push_back(it->methods[mi]);
      cell.methods.push_back(
          {spec.methods[mi], method_label(spec.methods[mi], spec.threshold), aggregate(per_method)});
    }
    if (spec.keep_records) cell.records.assign(first, first + static_cast<std::ptrdiff_t>(spec.reps));
    grid.cells.push_back(std::move(cell));
  }
  return grid;
}

/// %.17g, so equal doubles always print the same bytes.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& x) { return x ? fmt17(*x) : "NA"; }

inline void write_sweep_csv(std::ostream& os, const SweepGrid& g) {
  os << "alpha,gamma,delta,n,method,median_bias,coverage,n_failed,reps\n";
  for (const auto& c : g.cells)
    for (const auto& m : c.methods)
      os << fmt17(c.params.alpha) << ',' << fmt17(c.params.gamma) << ',' << fmt17(c.params.delta) << ','
         << c.params.n << ',' << m.label << ',' << fmt_opt(m.agg.median_bias) << ',' << fmt_opt(m.agg.coverage)
         << ',' << m.agg.n_failed << ',' << m.agg.reps << '\n';
}

inline void write_sweep_detail_csv(std::ostream& os, const SweepGrid& g) {
  os << "alpha,gamma,delta,n,rep,method,failed,estimate,lower,upper,covered,bias,error\n";
  for (const auto& c : g.cells)
    for (const auto& r : c.records)
      for (const auto& m : r.methods) {
        os << fmt17(c.params.alpha) << ',' << fmt17(c.params.gamma) << ',' << fmt17(c.params.delta) << ','
           << c.params.n << ',' << r.rep << ',' << m.label << ',' << (m.failed ? 1 : 0) << ',';
        if (m.failed)
          os << "NA,NA,NA,NA,NA," << to_string(*m.error) << '\n';
        else
          os << fmt17(m.estimate) << ',' << fmt17(m.ci.lower) << ',' << fmt17(m.ci.upper) << ','
             << (m.covered ? 1 : 0) << ',' << fmt17(m.bias) << ",\n";
      }
}

}  // namespace metasurf
