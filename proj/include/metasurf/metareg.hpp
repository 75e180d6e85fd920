#pragma once

// Fixed- and random-effects meta-regression on design-quality covariates.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "metasurf/core.hpp"
#include "metasurf/pooling.hpp"

namespace metasurf {

enum class Encoding {
  NumericLinear,         // quality score as one real column
  OrdinalIndicator,      // one indicator per non-ideal level; ideal is the reference
  OrdinalNumericScores,  // worst = 0, step 1
};

inline const char* to_string(Encoding e) {
  switch (e) {
    case Encoding::NumericLinear: return "numeric_linear";
    case Encoding::OrdinalIndicator: return "ordinal_indicator";
    case Encoding::OrdinalNumericScores: return "ordinal_numeric";
  }
  return "unknown";
}

inline Encoding parse_encoding(const std::string& s) {
  if (s == "numeric_linear") return Encoding::NumericLinear;
  if (s == "ordinal_indicator") return Encoding::OrdinalIndicator;
  if (s == "ordinal_numeric") return Encoding::OrdinalNumericScores;
  throw Error(ErrorCode::InvalidArgument, "unknown encoding '" + s + "'");
}

inline bool encoding_accepts(Encoding e, QualityKind k) {
  return (e == Encoding::NumericLinear) == (k == QualityKind::Numeric);
}

struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> labels;
  Eigen::VectorXd ideal_row;
  Encoding encoding = Encoding::NumericLinear;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

struct DesignOptions {
  bool include_covariates = false;
  // Values of the scientific covariates X = x at which to predict; one per
  // covariate, in declared order. Required when include_covariates is set.
  std::vector<double> covariate_target;
};

struct RegressionFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;
  double tau2 = 0.0;
  Encoding encoding = Encoding::NumericLinear;
  std::size_t k = 0;
  std::size_t p = 0;
  double residual_q = 0.0;
  Eigen::VectorXd ideal_row;
  std::vector<std::string> labels;
};

namespace detail {

inline double ordinal_score(const OrdinalLevel& l) { return static_cast<double>(l.index); }

// Non-ideal levels, nearest to the ideal first.
inline std::vector<std::size_t> indicator_levels(const OrdinalScale& scale) {
  std::vector<std::size_t> out;
  const std::size_t n = scale.size();
  for (std::size_t d = 1; d < n; ++d)
    for (std::size_t i = 0; i < n; ++i)
      if (i != scale.ideal_index() && scale.distance_from_ideal(i) == d) out.push_back(i);
  return out;
}

}  // namespace detail

inline DesignMatrix build_design_matrix(const StudyTable& t, Encoding encoding, const IdealPoint& ideal,
                                        const DesignOptions& opts = {}) {
  if (t.empty()) throw Error(ErrorCode::EmptyTable, "design matrix needs studies");
  if (!encoding_accepts(encoding, t.kind()))
    throw Error(ErrorCode::EncodingMismatch,
                std::string(to_string(encoding)) + " is incompatible with the table's quality kind");
  if (ideal.target.kind() != t.kind())
    throw Error(ErrorCode::EncodingMismatch, "ideal point kind differs from the table's");
  if (t.kind() == QualityKind::Ordinal && *ideal.target.level().scale != *t.scale())
    throw Error(ErrorCode::EncodingMismatch, "ideal point uses a different scale");

  std::vector<std::string> cov_names;
  if (opts.include_covariates) {
    for (const auto& c : t[0].extra_covariates) cov_names.push_back(c.name);
    for (const auto& s : t) {
      if (s.extra_covariates.size() != cov_names.size())
        throw Error(ErrorCode::EncodingMismatch, "study '" + s.id + "' has a different covariate set");
      for (std::size_t j = 0; j < cov_names.size(); ++j)
        if (s.extra_covariates[j].name != cov_names[j])
          throw Error(ErrorCode::EncodingMismatch, "study '" + s.id + "' covariate order differs");
    }
    if (opts.covariate_target.size() != cov_names.size())
      throw Error(ErrorCode::EncodingMismatch, "covariate target size does not match covariates");
  }

  DesignMatrix d;
  d.encoding = encoding;
  d.labels.push_back("intercept");
  std::vector<std::size_t> ind;
  switch (encoding) {
    case Encoding::NumericLinear: d.labels.push_back("quality"); break;
    case Encoding::OrdinalNumericScores: d.labels.push_back("quality_score"); break;
    case Encoding::OrdinalIndicator:
      ind = detail::indicator_levels(*t.scale());
      for (auto i : ind) d.labels.push_back("I(" + t.scale()->level(i) + ")");
      break;
  }
  const auto n_quality = d.labels.size() - 1;
  for (const auto& n : cov_names) d.labels.push_back(n);

  const auto n = static_cast<Eigen::Index>(t.size());
  const auto p = static_cast<Eigen::Index>(d.labels.size());
  d.x = Eigen::MatrixXd::Zero(n, p);
  d.ideal_row = Eigen::VectorXd::Zero(p);

  auto fill = [&](auto&& row, const DesignQuality& q) {
    row(0) = 1.0;
    switch (encoding) {
      case Encoding::NumericLinear: row(1) = q.score(); break;
      case Encoding::OrdinalNumericScores: row(1) = detail::ordinal_score(q.level()); break;
      case Encoding::OrdinalIndicator:
        for (std::size_t j = 0; j < ind.size(); ++j)
          row(static_cast<Eigen::Index>(1 + j)) = q.level().index == ind[j] ? 1.0 : 0.0;
        break;
    }
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = t[static_cast<std::size_t>(i)];
    auto row = d.x.row(i);
    fill(row, s.quality);
    for (std::size_t j = 0; j < cov_names.size(); ++j)
      row(static_cast<Eigen::Index>(1 + n_quality + j)) = s.extra_covariates[j].value;
  }
  fill(d.ideal_row, ideal.target);
  for (std::size_t j = 0; j < cov_names.size(); ++j)
    d.ideal_row(static_cast<Eigen::Index>(1 + n_quality + j)) = opts.covariate_target[j];
  return d;
}

/// Weighted least squares with weights 1/(se^2 + tau2). Solves through the
/// SVD of the sqrt-weighted design; a singular-value ratio below 1e-10 is
/// reported as RankDeficient.
inline RegressionFit wls_fit(std::span<const double> y, std::span<const double> se,
                             const Eigen::MatrixXd& x, double tau2) {
  const auto k = static_cast<Eigen::Index>(y.size());
  const auto p = x.cols();
  if (se.size() != y.size() || x.rows() != k)
    throw Error(ErrorCode::InvalidArgument, "y, se and design rows must agree");
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) throw Error(ErrorCode::InvalidArgument, "tau2 must be >= 0");
  if (k < p) throw Error(ErrorCode::TooFewStudies, "meta-regression needs k >= p");

  Eigen::VectorXd w(k), sw(k), yv(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    w(i) = 1.0 / (se[i] * se[i] + tau2);
    sw(i) = std::sqrt(w(i));
    yv(i) = y[i];
  }
  const Eigen::MatrixXd a = sw.asDiagonal() * x;
  const Eigen::VectorXd b = sw.cwiseProduct(yv);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0 || sv(sv.size() - 1) < 1e-10 * sv(0))
    throw Error(ErrorCode::RankDeficient, "weighted design is rank deficient");

  const Eigen::VectorXd inv_sv = sv.cwiseInverse();
  RegressionFit f;
  f.coefficients = svd.matrixV() * inv_sv.asDiagonal() * (svd.matrixU().transpose() * b);
  const Eigen::MatrixXd vs = svd.matrixV() * inv_sv.asDiagonal();
  f.cov = vs * vs.transpose();
  f.cov = 0.5 * (f.cov + f.cov.transpose()).eval();
  f.tau2 = tau2;
  f.k = static_cast<std::size_t>(k);
  f.p = static_cast<std::size_t>(p);
  const Eigen::VectorXd r = yv - x * f.coefficients;
  f.residual_q = (w.array() * r.array().square()).sum();
  return f;
}

inline RegressionFit wls_fit(std::span<const double> y, std::span<const double> se, const DesignMatrix& d,
                             double tau2) {
  auto f = wls_fit(y, se, d.x, tau2);
  f.encoding = d.encoding;
  f.ideal_row = d.ideal_row;
  f.labels = d.labels;
  return f;
}

/// Method-of-moments between-study variance for a meta-regression:
/// max(0, (Q_E - (k - p)) / (tr W - tr((X'WX)^-1 X'W^2 X))), W = diag(1/se^2).
/// The denominator equals sum_i w_i (1 - h_ii); 1 - h_ii and Q_E are taken
/// from the orthogonal complement of the weighted design, which avoids the
/// cancellation of the direct trace difference at high-leverage studies.
inline double re_metareg_tau2(std::span<const double> y, std::span<const double> se, const Eigen::MatrixXd& x) {
  const auto k = static_cast<Eigen::Index>(y.size());
  const auto p = x.cols();
  if (se.size() != y.size() || x.rows() != k)
    throw Error(ErrorCode::InvalidArgument, "y, se and design rows must agree");
  if (k < p + 1) throw Error(ErrorCode::TooFewStudies, "random-effects meta-regression needs k >= p + 1");

  Eigen::VectorXd w(k), sw(k), yv(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    w(i) = 1.0 / (se[i] * se[i]);
    sw(i) = std::sqrt(w(i));
    yv(i) = y[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sw.asDiagonal() * x, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0 || sv(sv.size() - 1) < 1e-10 * sv(0))
    throw Error(ErrorCode::RankDeficient, "weighted design is rank deficient");

  const auto perp = svd.matrixU().rightCols(k - p);
  const double q = (perp.transpose() * sw.cwiseProduct(yv)).squaredNorm();
  const double denom = (w.array() * perp.rowwise().squaredNorm().array()).sum();
  const double excess = q - static_cast<double>(k - p);
  if (excess <= 0.0 || denom <= 0.0) return 0.0;
  return excess / denom;
}

inline double re_metareg_tau2(std::span<const double> y, std::span<const double> se, const DesignMatrix& d) {
  return re_metareg_tau2(y, se, d.x);
}

inline RegressionFit fit_metareg(const StudyTable& t, Encoding encoding, const IdealPoint& ideal,
                                 PoolingMethod method, const DesignOptions& opts = {}) {
  const auto d = build_design_matrix(t, encoding, ideal, opts);
  const auto y = t.effects();
  const auto s = t.ses();
  const double tau2 = method == PoolingMethod::FixedEffect ? 0.0 : re_metareg_tau2(y, s, d);
  return wls_fit(y, s, d, tau2);
}

}  // namespace metasurf
