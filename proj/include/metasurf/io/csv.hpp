#pragma once

// Study-table CSV: header row, then one study per line.
//
//   id,effect,se,quality_numeric[,covariate...]
//   id,effect,se,quality_level[,covariate...]
//
// Any column other than the four reserved names is a numeric covariate,
// carried in header order. Fields may be double-quoted ("" escapes a quote).

#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metasurf/core.hpp"

namespace metasurf::io {

/// An error tied to a position in an input file. line is 1-based and counts
/// the header; column is the header name (empty when not column-specific).
class LocatedError : public Error {
 public:
  LocatedError(ErrorCode code, std::size_t line, std::string column, const std::string& reason)
      : Error(code, describe(line, column, reason)), line_(line), column_(std::move(column)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  static std::string describe(std::size_t line, const std::string& column, const std::string& reason) {
    std::string s = "line " + std::to_string(line);
    if (!column.empty()) s += ", column '" + column + "'";
    return s + ": " + reason;
  }

  std::size_t line_;
  std::string column_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      if (!cur.empty() || was_quoted) throw LocatedError(ErrorCode::ParseError, line_no, "", "stray quote");
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw LocatedError(ErrorCode::ParseError, line_no, "", "text after closing quote");
      cur += c;
    }
  }
  if (quoted) throw LocatedError(ErrorCode::ParseError, line_no, "", "unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& raw, std::size_t line, const std::string& col) {
  const auto s = trim(raw);
  if (s.empty()) throw LocatedError(ErrorCode::ParseError, line, col, "empty value");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw LocatedError(ErrorCode::ParseError, line, col, "not a number: '" + s + "'");
  if (!std::isfinite(v)) throw LocatedError(ErrorCode::NonFiniteValue, line, col, "non-finite value");
  return v;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

struct IngestResult {
  StudyTable table;
  ScalePtr scale;  // null for numeric tables
  std::vector<std::string> covariate_names;
};

/// Parses and validates a study table. Ordinal levels are resolved against
/// `scale`; without one, the default low/unclear/high risk-of-bias scale is
/// assumed.
inline IngestResult parse_study_csv(std::istream& in, std::optional<OrdinalScale> scale = std::nullopt) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    header = detail::split_csv_line(line, line_no);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::SchemaError, "missing header row");
  const std::size_t header_line = line_no;

  int c_id = -1, c_eff = -1, c_se = -1, c_num = -1, c_lvl = -1;
  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = detail::trim(header[i]);
    if (name.empty()) throw LocatedError(ErrorCode::SchemaError, header_line, "", "empty column name");
    if (!seen.insert(name).second) throw LocatedError(ErrorCode::SchemaError, header_line, name, "duplicate column");
    const int ci = static_cast<int>(i);
    if (name == "id") c_id = ci;
    else if (name == "effect") c_eff = ci;
    else if (name == "se") c_se = ci;
    else if (name == "quality_numeric") c_num = ci;
    else if (name == "quality_level") c_lvl = ci;
    else {
      cov_cols.push_back(ci);
      cov_names.push_back(name);
    }
  }
  for (auto [col, name] : {std::pair{c_id, "id"}, std::pair{c_eff, "effect"}, std::pair{c_se, "se"}})
    if (col < 0) throw LocatedError(ErrorCode::SchemaError, header_line, name, "required column missing");
  if (c_num >= 0 && c_lvl >= 0)
    throw LocatedError(ErrorCode::SchemaError, header_line, "",
                       "both quality_numeric and quality_level present; exactly one is allowed");
  if (c_num < 0 && c_lvl < 0)
    throw LocatedError(ErrorCode::SchemaError, header_line, "", "no quality column (quality_numeric or quality_level)");

  ScalePtr sp;
  if (c_lvl >= 0) sp = make_scale(scale ? *scale : OrdinalScale::risk_of_bias());

  std::vector<Study> studies;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line, line_no);
    if (f.size() != header.size())
      throw LocatedError(ErrorCode::ParseError, line_no, "",
                         "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Study s;
    s.id = detail::trim(f[static_cast<std::size_t>(c_id)]);
    if (s.id.empty()) throw LocatedError(ErrorCode::ParseError, line_no, "id", "empty id");
    if (!ids.insert(s.id).second) throw LocatedError(ErrorCode::SchemaError, line_no, "id", "duplicate id '" + s.id + "'");
    s.effect = detail::parse_real(f[static_cast<std::size_t>(c_eff)], line_no, "effect");
    s.se = detail::parse_real(f[static_cast<std::size_t>(c_se)], line_no, "se");
    if (!(s.se > 0.0)) throw LocatedError(ErrorCode::NonPositiveSE, line_no, "se", "se must be > 0");
    if (c_num >= 0) {
      s.quality = DesignQuality::numeric(
          detail::parse_real(f[static_cast<std::size_t>(c_num)], line_no, "quality_numeric"));
    } else {
      const auto lvl = detail::trim(f[static_cast<std::size_t>(c_lvl)]);
      if (!sp->index_of(lvl))
        throw LocatedError(ErrorCode::ParseError, line_no, "quality_level", "level '" + lvl + "' is not in the scale");
      s.quality = DesignQuality::ordinal(sp, lvl);
    }
    for (std::size_t j = 0; j < cov_cols.size(); ++j)
      s.extra_covariates.push_back(
          {cov_names[j], detail::parse_real(f[static_cast<std::size_t>(cov_cols[j])], line_no, cov_names[j])});
    studies.push_back(std::move(s));
  }
  if (studies.empty()) throw Error(ErrorCode::EmptyTable, "no data rows");
  return {validate_table(std::move(studies)), sp, cov_names};
}

inline IngestResult ingest(const std::string& path, std::optional<OrdinalScale> scale = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_study_csv(in, std::move(scale));
}

inline void write_study_csv(std::ostream& os, const StudyTable& t) {
  const bool numeric = t.kind() == QualityKind::Numeric;
  os << "id,effect,se," << (numeric ? "quality_numeric" : "quality_level");
  if (!t.empty())
    for (const auto& c : t[0].extra_covariates) os << ',' << detail::quote_if_needed(c.name);
  os << '\n';
  for (const auto& s : t) {
    os << detail::quote_if_needed(s.id) << ',' << detail::fmt17(s.effect) << ',' << detail::fmt17(s.se) << ',';
    if (numeric) os << detail::fmt17(s.quality.score());
    else os << detail::quote_if_needed(s.quality.level().name());
    for (const auto& c : s.extra_covariates) os << ',' << detail::fmt17(c.value);
    os << '\n';
  }
}

}  // namespace metasurf::io
