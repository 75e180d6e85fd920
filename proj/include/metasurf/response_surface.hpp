#pragma once

// Response-surface meta-analysis: fit the effect-vs-quality surface and read
// off the mean effect at the ideal study. Also the six-way comparison with
// literature-synthesis estimators and the encoding sensitivity analysis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "metasurf/core.hpp"
#include "metasurf/metareg.hpp"
#include "metasurf/pooling.hpp"

namespace metasurf {

struct PredictionResult {
  double estimate = 0.0;
  double se = 0.0;
  ConfidenceInterval ci;
  std::string method;  // RSF | RSR, or the pooling label for subgroup variants
  Encoding encoding = Encoding::NumericLinear;
  double tau2 = 0.0;
};

/// Conditional mean x_ideal' beta with se sqrt(x_ideal' cov x_ideal).
inline PredictionResult predict_at_ideal(const RegressionFit& fit) {
  if (fit.ideal_row.size() != fit.coefficients.size())
    throw Error(ErrorCode::InvalidArgument, "fit carries no ideal row");
  PredictionResult r;
  r.estimate = fit.ideal_row.dot(fit.coefficients);
  const double var = fit.ideal_row.dot(fit.cov * fit.ideal_row);
  r.se = std::sqrt(std::max(var, 0.0));
  r.ci = ConfidenceInterval::normal(r.estimate, r.se);
  r.method = fit.tau2 > 0.0 ? "RSR" : "RSF";
  r.encoding = fit.encoding;
  r.tau2 = fit.tau2;
  return r;
}

inline PredictionResult predict_at_ideal(const RegressionFit& fit, PoolingMethod method) {
  auto r = predict_at_ideal(fit);
  r.method = method == PoolingMethod::FixedEffect ? "RSF" : "RSR";
  return r;
}

enum class Method { FE, RE, FEt, REt, RSF, RSR };

inline constexpr std::array<Method, 6> kAllMethods = {Method::FE,  Method::RE,  Method::FEt,
                                                      Method::REt, Method::RSF, Method::RSR};

inline std::string format_threshold(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

inline std::string method_label(Method m, double threshold) {
  switch (m) {
    case Method::FE: return "FE";
    case Method::RE: return "RE";
    case Method::FEt: return "FE" + format_threshold(threshold);
    case Method::REt: return "RE" + format_threshold(threshold);
    case Method::RSF: return "RSF";
    case Method::RSR: return "RSR";
  }
  return "?";
}

/// Accepts "FE", "RE", "FEt", "REt", "RSF", "RSR".
inline Method parse_method(const std::string& s) {
  if (s == "FE") return Method::FE;
  if (s == "RE") return Method::RE;
  if (s == "FEt") return Method::FEt;
  if (s == "REt") return Method::REt;
  if (s == "RSF") return Method::RSF;
  if (s == "RSR") return Method::RSR;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "'");
}

inline const char* method_key(Method m) {
  switch (m) {
    case Method::FE: return "FE";
    case Method::RE: return "RE";
    case Method::FEt: return "FEt";
    case Method::REt: return "REt";
    case Method::RSF: return "RSF";
    case Method::RSR: return "RSR";
  }
  return "?";
}

struct Failure {
  ErrorCode code;
  std::string message;
};

struct MethodOutcome {
  Method method;
  std::string label;
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
  double tau2 = 0.0;
  std::optional<Failure> failure;

  bool ok() const noexcept { return !failure.has_value(); }
};

struct MethodComparison {
  std::vector<MethodOutcome> outcomes;
  double threshold = 9.0;
  bool strict = true;

  const MethodOutcome* find(Method m) const {
    for (const auto& o : outcomes)
      if (o.method == m) return &o;
    return nullptr;
  }
};

struct CompareOptions {
  double threshold = 9.0;
  bool strict = true;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
};

namespace detail {

template <class F>
MethodOutcome capture(Method m, double threshold, F&& f) {
  MethodOutcome o{m, method_label(m, threshold), {}, {}, {}, 0.0, {}};
  try {
    auto [est, se, tau2] = f();
    o.estimate = est;
    o.se = se;
    o.ci = ConfidenceInterval::normal(est, se);
    o.tau2 = tau2;
  } catch (const Error& e) {
    o.failure = Failure{e.code(), e.what()};
  }
  return o;
}

struct Triple {
  double estimate, se, tau2;
};

inline Triple from_pool(const PooledEstimate& p) { return {p.estimate, p.se, p.tau2}; }
inline Triple from_prediction(const PredictionResult& p) { return {p.estimate, p.se, p.tau2}; }

}  // namespace detail

inline MethodComparison compare_methods(const StudyTable& t, const IdealPoint& ideal, Encoding encoding,
                                        const CompareOptions& opts = {}) {
  if (t.empty()) throw Error(ErrorCode::EmptyTable, "no studies to compare");
  MethodComparison c;
  c.threshold = opts.threshold;
  c.strict = opts.strict;
  for (Method m : opts.methods) {
    c.outcomes.push_back(detail::capture(m, opts.threshold, [&]() -> detail::Triple {
      switch (m) {
        case Method::FE: return detail::from_pool(fixed_effect_pool(t));
        case Method::RE: return detail::from_pool(random_effects_pool(t));
        case Method::FEt: return detail::from_pool(fixed_effect_pool(threshold_subset(t, opts.threshold, opts.strict)));
        case Method::REt:
          return detail::from_pool(random_effects_pool(threshold_subset(t, opts.threshold, opts.strict)));
        case Method::RSF:
          return detail::from_prediction(
              predict_at_ideal(fit_metareg(t, encoding, ideal, PoolingMethod::FixedEffect), PoolingMethod::FixedEffect));
        case Method::RSR:
          return detail::from_prediction(predict_at_ideal(
              fit_metareg(t, encoding, ideal, PoolingMethod::RandomEffectsDL), PoolingMethod::RandomEffectsDL));
      }
      throw Error(ErrorCode::InvalidArgument, "unknown method");
    }));
  }
  return c;
}

/// Non-fatal: returns a message when the ideal quality lies outside the
/// observed quality range (numeric) or no study sits at the ideal level.
inline std::optional<std::string> extrapolation_warning(const StudyTable& t, const IdealPoint& ideal) {
  if (t.empty()) return std::nullopt;
  if (t.kind() == QualityKind::Numeric) {
    double lo = t[0].quality.score(), hi = lo;
    for (const auto& s : t) {
      lo = std::min(lo, s.quality.score());
      hi = std::max(hi, s.quality.score());
    }
    const double z = ideal.target.score();
    if (z < lo || z > hi) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "ideal quality %g lies outside the observed range [%g, %g]", z, lo, hi);
      return std::string(buf);
    }
    return std::nullopt;
  }
  const auto want = ideal.target.level().index;
  for (const auto& s : t)
    if (s.quality.level().index == want) return std::nullopt;
  return "no study is rated at the ideal level '" + ideal.target.level().name() + "'";
}

struct SensitivityVariant {
  std::string label;
  std::optional<PredictionResult> result;
  std::optional<Failure> failure;
};

inline constexpr const char* kSensOrdinal = "rsr_ordinal_indicator";
inline constexpr const char* kSensNumeric = "rsr_ordinal_numeric";
inline constexpr const char* kSensIdealOnly = "pool_ideal_level_only";

/// Three modeling choices for an ordinal table: RSR with indicator coding,
/// RSR with equally spaced scores, and pooling only the ideal-level subgroup
/// (random effects for k >= 2, fixed effect for k = 1).
inline std::vector<SensitivityVariant> sensitivity_analysis(const StudyTable& t, const IdealPoint& ideal) {
  if (t.kind() != QualityKind::Ordinal)
    throw Error(ErrorCode::EncodingMismatch, "sensitivity analysis needs an ordinal quality table");
  std::vector<SensitivityVariant> out;
  auto run = [&](const char* label, auto&& f) {
    SensitivityVariant v{label, {}, {}};
    try {
      v.result = f();
    } catch (const Error& e) {
      v.failure = Failure{e.code(), e.what()};
    }
    out.push_back(std::move(v));
  };
  run(kSensOrdinal, [&] {
    return predict_at_ideal(fit_metareg(t, Encoding::OrdinalIndicator, ideal, PoolingMethod::RandomEffectsDL),
                            PoolingMethod::RandomEffectsDL);
  });
  run(kSensNumeric, [&] {
    return predict_at_ideal(fit_metareg(t, Encoding::OrdinalNumericScores, ideal, PoolingMethod::RandomEffectsDL),
                            PoolingMethod::RandomEffectsDL);
  });
  run(kSensIdealOnly, [&] {
    const auto sub = level_subset(t, ideal.target.level().index);
    if (sub.empty()) throw Error(ErrorCode::TooFewStudies, "no studies at the ideal level");
    const bool re = sub.size() >= 2;
    const auto p = re ? random_effects_pool(sub) : fixed_effect_pool(sub);
    PredictionResult r;
    r.estimate = p.estimate;
    r.se = p.se;
    r.ci = p.ci;
    r.method = re ? "RE" : "FE";
    r.encoding = Encoding::OrdinalIndicator;
    r.tau2 = p.tau2;
    return r;
  });
  return out;
}

}  // namespace metasurf
