#pragma once

// Literature-synthesis estimators: inverse-variance fixed-effect pooling,
// DerSimonian-Laird random effects, and quality-threshold subsetting.

#include <cmath>
#include <span>
#include <string>

#include "metasurf/core.hpp"

namespace metasurf {

enum class PoolingMethod { FixedEffect, RandomEffectsDL };

inline const char* to_string(PoolingMethod m) {
  return m == PoolingMethod::FixedEffect ? "FixedEffect" : "RandomEffectsDL";
}

namespace detail {

struct WeightedMean {
  double mean = 0.0;
  double sum_w = 0.0;
};

inline WeightedMean weighted_mean(std::span<const double> y, std::span<const double> se,
                                  double tau2) {
  WeightedMean r;
  double num = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = 1.0 / (se[i] * se[i] + tau2);
    num += w * y[i];
    r.sum_w += w;
  }
  r.mean = num / r.sum_w;
  return r;
}

// Cochran's Q about the fixed-effect mean.
inline double cochran_q(std::span<const double> y, std::span<const double> se, double mean) {
  double q = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - mean;
    q += d * d / (se[i] * se[i]);
  }
  return q;
}

}  // namespace detail

inline PooledEstimate fixed_effect_pool(std::span<const double> y, std::span<const double> se) {
  if (y.empty()) throw Error(ErrorCode::EmptyTable, "fixed-effect pooling needs at least one study");
  const auto wm = detail::weighted_mean(y, se, 0.0);
  PooledEstimate p;
  p.estimate = wm.mean;
  p.se = 1.0 / std::sqrt(wm.sum_w);
  p.ci = ConfidenceInterval::normal(p.estimate, p.se);
  p.tau2 = 0.0;
  p.q_stat = detail::cochran_q(y, se, wm.mean);
  p.k = y.size();
  return p;
}

inline double dl_tau_squared(std::span<const double> y, std::span<const double> se) {
  const std::size_t k = y.size();
  if (k < 2) throw Error(ErrorCode::TooFewStudies, "DerSimonian-Laird needs k >= 2");
  const auto fe = detail::weighted_mean(y, se, 0.0);
  const double q = detail::cochran_q(y, se, fe.mean);
  double sum_w2 = 0.0;
  for (double s : se) sum_w2 += 1.0 / (s * s * s * s);
  const double c = fe.sum_w - sum_w2 / fe.sum_w;
  const double excess = q - static_cast<double>(k - 1);
  if (excess <= 0.0 || c <= 0.0) return 0.0;
  return excess / c;
}

inline PooledEstimate random_effects_pool(std::span<const double> y, std::span<const double> se) {
  const double tau2 = dl_tau_squared(y, se);
  const auto fe = fixed_effect_pool(y, se);
  if (tau2 == 0.0) return fe;
  const auto wm = detail::weighted_mean(y, se, tau2);
  PooledEstimate p;
  p.estimate = wm.mean;
  p.se = 1.0 / std::sqrt(wm.sum_w);
  p.ci = ConfidenceInterval::normal(p.estimate, p.se);
  p.tau2 = tau2;
  p.q_stat = fe.q_stat;
  p.k = y.size();
  return p;
}

inline PooledEstimate fixed_effect_pool(const StudyTable& t) {
  const auto y = t.effects();
  const auto s = t.ses();
  return fixed_effect_pool(y, s);
}

inline double dl_tau_squared(const StudyTable& t) {
  const auto y = t.effects();
  const auto s = t.ses();
  return dl_tau_squared(y, s);
}

inline PooledEstimate random_effects_pool(const StudyTable& t) {
  const auto y = t.effects();
  const auto s = t.ses();
  return random_effects_pool(y, s);
}

inline PooledEstimate pool(const StudyTable& t, PoolingMethod m) {
  return m == PoolingMethod::FixedEffect ? fixed_effect_pool(t) : random_effects_pool(t);
}

/// Keeps studies with Z > min_quality (strict) or Z >= min_quality. The
/// result may be empty; pooling an empty table raises EmptyTable.
inline StudyTable threshold_subset(const StudyTable& t, double min_quality, bool strict = true) {
  if (t.kind() != QualityKind::Numeric)
    throw Error(ErrorCode::OrdinalQualityUnsupported,
                "thresholding needs numeric quality; filter ordinal levels explicitly");
  return t.filter([&](const Study& s) {
    const double z = s.quality.score();
    return strict ? z > min_quality : z >= min_quality;
  });
}

/// Subgroup of an ordinal table at one level.
inline StudyTable level_subset(const StudyTable& t, std::size_t level_index) {
  if (t.kind() != QualityKind::Ordinal)
    throw Error(ErrorCode::EncodingMismatch, "level subset needs ordinal quality");
  return t.filter([&](const Study& s) { return s.quality.level().index == level_index; });
}

}  // namespace metasurf
