#pragma once

// Domain vocabulary: studies, design-quality encodings, estimates, intervals.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace metasurf {

inline constexpr double kZ95 = 1.96;

enum class ErrorCode {
  EmptyTable,
  NonPositiveSE,
  NonFiniteValue,
  MixedQualityScales,
  InvalidScale,
  TooFewStudies,
  OrdinalQualityUnsupported,
  EncodingMismatch,
  RankDeficient,
  InvalidArgument,
  ParseError,
  SchemaError,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::NonPositiveSE: return "NonPositiveSE";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::MixedQualityScales: return "MixedQualityScales";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::TooFewStudies: return "TooFewStudies";
    case ErrorCode::OrdinalQualityUnsupported: return "OrdinalQualityUnsupported";
    case ErrorCode::EncodingMismatch: return "EncodingMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Ordered, named quality scale. Levels run worst -> best; the ideal level
// must sit at one of the two extremes.
class OrdinalScale {
 public:
  OrdinalScale(std::vector<std::string> levels, std::string ideal)
      : levels_(std::move(levels)) {
    if (levels_.size() < 2) throw Error(ErrorCode::InvalidScale, "scale needs at least two levels");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i].empty()) throw Error(ErrorCode::InvalidScale, "empty level name");
      for (std::size_t j = 0; j < i; ++j)
        if (levels_[i] == levels_[j])
          throw Error(ErrorCode::InvalidScale, "duplicate level '" + levels_[i] + "'");
    }
    auto idx = index_of(ideal);
    if (!idx) throw Error(ErrorCode::InvalidScale, "ideal level '" + ideal + "' not in scale");
    if (*idx != 0 && *idx != levels_.size() - 1)
      throw Error(ErrorCode::InvalidScale, "ideal level must be an extreme of the scale");
    ideal_ = *idx;
  }

  /// Cochrane-style overall risk of bias, worst first, ideal = "low".
  static OrdinalScale risk_of_bias() { return {{"high", "unclear", "low"}, "low"}; }

  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  std::size_t ideal_index() const noexcept { return ideal_; }
  const std::string& ideal_level() const noexcept { return levels_[ideal_]; }
  const std::string& level(std::size_t i) const { return levels_.at(i); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < levels_.size(); ++i)
      if (levels_[i] == name) return i;
    return std::nullopt;
  }

  // Distance in steps from the ideal level.
  std::size_t distance_from_ideal(std::size_t i) const {
    return i > ideal_ ? i - ideal_ : ideal_ - i;
  }

  friend bool operator==(const OrdinalScale&, const OrdinalScale&) = default;

 private:
  std::vector<std::string> levels_;
  std::size_t ideal_ = 0;
};

using ScalePtr = std::shared_ptr<const OrdinalScale>;

inline ScalePtr make_scale(OrdinalScale s) { return std::make_shared<const OrdinalScale>(std::move(s)); }

struct OrdinalLevel {
  ScalePtr scale;
  std::size_t index = 0;

  const std::string& name() const { return scale->level(index); }
};

enum class QualityKind { Numeric, Ordinal };

class DesignQuality {
 public:
  static DesignQuality numeric(double score) { return DesignQuality(score); }

  static DesignQuality ordinal(ScalePtr scale, const std::string& level) {
    if (!scale) throw Error(ErrorCode::InvalidScale, "null scale");
    auto idx = scale->index_of(level);
    if (!idx) throw Error(ErrorCode::InvalidScale, "level '" + level + "' not in scale");
    return DesignQuality(OrdinalLevel{std::move(scale), *idx});
  }

  QualityKind kind() const noexcept {
    return std::holds_alternative<double>(v_) ? QualityKind::Numeric : QualityKind::Ordinal;
  }
  bool is_numeric() const noexcept { return kind() == QualityKind::Numeric; }
  double score() const { return std::get<double>(v_); }
  const OrdinalLevel& level() const { return std::get<OrdinalLevel>(v_); }

  friend bool operator==(const DesignQuality& a, const DesignQuality& b) {
    if (a.kind() != b.kind()) return false;
    if (a.is_numeric()) return a.score() == b.score();
    return a.level().index == b.level().index && *a.level().scale == *b.level().scale;
  }

 private:
  explicit DesignQuality(double s) : v_(s) {}
  explicit DesignQuality(OrdinalLevel l) : v_(std::move(l)) {}

  std::variant<double, OrdinalLevel> v_;
};

struct Covariate {
  std::string name;
  double value = 0.0;

  friend bool operator==(const Covariate&, const Covariate&) = default;
};

struct Study {
  std::string id;
  double effect = 0.0;
  double se = 1.0;
  DesignQuality quality = DesignQuality::numeric(0.0);
  std::vector<Covariate> extra_covariates;

  friend bool operator==(const Study&, const Study&) = default;
};

// The quality of the perfect study.
struct IdealPoint {
  DesignQuality target;

  static IdealPoint numeric(double z) { return {DesignQuality::numeric(z)}; }
  static IdealPoint ordinal(const ScalePtr& scale) {
    return {DesignQuality::ordinal(scale, scale->ideal_level())};
  }
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  static ConfidenceInterval normal(double estimate, double se) {
    return {estimate - kZ95 * se, estimate + kZ95 * se, 0.95};
  }
  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
  double width() const noexcept { return upper - lower; }
};

struct PooledEstimate {
  double estimate = 0.0;
  double se = 0.0;
  ConfidenceInterval ci;
  double tau2 = 0.0;
  double q_stat = 0.0;
  std::size_t k = 0;

  // Diagnostic only: max(0, (Q - (k-1)) / Q), as a fraction.
  double i_squared() const noexcept {
    if (k < 2 || q_stat <= 0.0) return 0.0;
    double v = (q_stat - static_cast<double>(k - 1)) / q_stat;
    return v > 0.0 ? v : 0.0;
  }
};

class StudyTable;
StudyTable validate_table(std::vector<Study> studies);

// A table whose studies all satisfy the Study invariants and share one
// quality kind (and, for ordinal tables, one scale). Only constructed via
// validate_table or by subsetting an existing table, so it may be empty only
// as the result of a filter.
class StudyTable {
 public:
  const std::vector<Study>& studies() const noexcept { return studies_; }
  std::size_t size() const noexcept { return studies_.size(); }
  bool empty() const noexcept { return studies_.empty(); }
  const Study& operator[](std::size_t i) const { return studies_[i]; }
  auto begin() const noexcept { return studies_.begin(); }
  auto end() const noexcept { return studies_.end(); }

  QualityKind kind() const noexcept { return kind_; }
  const ScalePtr& scale() const noexcept { return scale_; }

  std::vector<double> effects() const {
    std::vector<double> v;
    v.reserve(studies_.size());
    for (const auto& s : studies_) v.push_back(s.effect);
    return v;
  }
  std::vector<double> ses() const {
    std::vector<double> v;
    v.reserve(studies_.size());
    for (const auto& s : studies_) v.push_back(s.se);
    return v;
  }

  template <class Pred>
  StudyTable filter(Pred&& keep) const {
    StudyTable t;
    t.kind_ = kind_;
    t.scale_ = scale_;
    for (const auto& s : studies_)
      if (keep(s)) t.studies_.push_back(s);
    return t;
  }

  friend bool operator==(const StudyTable& a, const StudyTable& b) {
    return a.kind_ == b.kind_ && a.studies_ == b.studies_;
  }

 private:
  friend StudyTable validate_table(std::vector<Study> studies);

  std::vector<Study> studies_;
  QualityKind kind_ = QualityKind::Numeric;
  ScalePtr scale_;
};

inline StudyTable validate_table(std::vector<Study> studies) {
  if (studies.empty()) throw Error(ErrorCode::EmptyTable, "no studies");
  const auto kind = studies.front().quality.kind();
  ScalePtr scale = kind == QualityKind::Ordinal ? studies.front().quality.level().scale : nullptr;
  for (const auto& s : studies) {
    if (!std::isfinite(s.effect) || !std::isfinite(s.se))
      throw Error(ErrorCode::NonFiniteValue, "study '" + s.id + "' has a non-finite effect or se");
    if (!(s.se > 0.0)) throw Error(ErrorCode::NonPositiveSE, "study '" + s.id + "' has se <= 0");
    if (s.quality.kind() != kind)
      throw Error(ErrorCode::MixedQualityScales, "numeric and ordinal quality mixed");
    if (kind == QualityKind::Numeric) {
      if (!std::isfinite(s.quality.score()))
        throw Error(ErrorCode::NonFiniteValue, "study '" + s.id + "' has a non-finite quality score");
    } else if (*s.quality.level().scale != *scale) {
      throw Error(ErrorCode::MixedQualityScales, "studies use different ordinal scales");
    }
    for (const auto& c : s.extra_covariates)
      if (!std::isfinite(c.value))
        throw Error(ErrorCode::NonFiniteValue, "study '" + s.id + "' covariate '" + c.name + "'");
  }
  StudyTable t;
  t.studies_ = std::move(studies);
  t.kind_ = kind;
  t.scale_ = std::move(scale);
  return t;
}

inline StudyTable validate_table(const StudyTable& table) {
  return validate_table(std::vector<Study>(table.studies()));
}

}  // namespace metasurf
