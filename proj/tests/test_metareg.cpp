#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "metasurf/metareg.hpp"
#include "oracles.hpp"

using namespace metasurf;

namespace {

Eigen::MatrixXd to_eigen(const oracle::Mat& m) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return x;
}

oracle::Mat design(const oracle::Table& t, std::size_t p) {
  oracle::Mat x;
  for (std::size_t i = 0; i < t.y.size(); ++i) {
    oracle::Vec row{1.0};
    if (p >= 2) row.push_back(t.z[i]);
    if (p >= 3) row.push_back(t.z2[i]);
    x.push_back(row);
  }
  return x;
}

ScalePtr rob() {
  static const auto s = make_scale(OrdinalScale::risk_of_bias());
  return s;
}

Study ord(double e, double s, const char* level) { return Study{"x", e, s, DesignQuality::ordinal(rob(), level), {}}; }

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("design matrix: ordinal indicator coding uses the ideal as reference", "[metareg]") {
  const auto t = validate_table({ord(1, 1, "high"), ord(2, 1, "unclear"), ord(3, 1, "low")});
  const auto d = build_design_matrix(t, Encoding::OrdinalIndicator, IdealPoint::ordinal(rob()));
  REQUIRE(d.labels == std::vector<std::string>{"intercept", "I(unclear)", "I(high)"});
  Eigen::MatrixXd want(3, 3);
  want << 1, 0, 1, 1, 1, 0, 1, 0, 0;
  CHECK(d.x == want);
  CHECK(d.ideal_row == Eigen::Vector3d(1, 0, 0));
}

TEST_CASE("design matrix: numeric and ordinal-score codings", "[metareg]") {
  const auto t = validate_table({Study{"a", 0, 1, DesignQuality::numeric(4), {}}, Study{"b", 1, 1, DesignQuality::numeric(10), {}}});
  const auto d = build_design_matrix(t, Encoding::NumericLinear, IdealPoint::numeric(10));
  Eigen::MatrixXd want(2, 2);
  want << 1, 4, 1, 10;
  CHECK(d.x == want);
  CHECK(d.ideal_row == Eigen::Vector2d(1, 10));

  const auto o = validate_table({ord(1, 1, "high"), ord(2, 1, "unclear"), ord(3, 1, "low")});
  const auto s = build_design_matrix(o, Encoding::OrdinalNumericScores, IdealPoint::ordinal(rob()));
  CHECK(s.x.col(1) == Eigen::Vector3d(0, 1, 2));
  CHECK(s.ideal_row == Eigen::Vector2d(1, 2));
}

TEST_CASE("design matrix: encoding mismatches", "[metareg]") {
  const auto o = validate_table({ord(1, 1, "high"), ord(3, 1, "low")});
  CHECK(code_of([&] { build_design_matrix(o, Encoding::NumericLinear, IdealPoint::ordinal(rob())); }) ==
        ErrorCode::EncodingMismatch);
  CHECK(code_of([&] { build_design_matrix(o, Encoding::OrdinalIndicator, IdealPoint::numeric(10)); }) ==
        ErrorCode::EncodingMismatch);
  const auto n = validate_table({Study{"a", 0, 1, DesignQuality::numeric(4), {}}});
  CHECK(code_of([&] { build_design_matrix(n, Encoding::OrdinalIndicator, IdealPoint::numeric(10)); }) ==
        ErrorCode::EncodingMismatch);
}

TEST_CASE("design matrix: passthrough covariates", "[metareg]") {
  auto s = [](double e, double z, double age) {
    return Study{"s", e, 1, DesignQuality::numeric(z), {{"age", age}}};
  };
  const auto t = validate_table({s(1, 2, 30), s(2, 5, 40), s(3, 9, 50)});
  const auto d = build_design_matrix(t, Encoding::NumericLinear, IdealPoint::numeric(10), {true, {45}});
  CHECK(d.labels == std::vector<std::string>{"intercept", "quality", "age"});
  CHECK(d.x(2, 2) == 50);
  CHECK(d.ideal_row == Eigen::Vector3d(1, 10, 45));
  CHECK(code_of([&] { build_design_matrix(t, Encoding::NumericLinear, IdealPoint::numeric(10), {true, {}}); }) ==
        ErrorCode::EncodingMismatch);
  // covariates are ignored unless requested
  CHECK(build_design_matrix(t, Encoding::NumericLinear, IdealPoint::numeric(10)).cols() == 2);
}

TEST_CASE("wls_fit hand-computed cases", "[metareg]") {
  const std::vector<double> y{0, 10}, s{1, 1};
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 1, 10;
  const auto f = wls_fit(y, s, x, 0.0);
  CHECK(f.coefficients(0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(f.coefficients(1) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(f.residual_q == Catch::Approx(0.0).margin(1e-20));

  const std::vector<double> ones{1, 1, 1}, s3{0.5, 1, 2};
  Eigen::MatrixXd x3(3, 2);
  x3 << 1, 2, 1, 5, 1, 7;
  const auto c = wls_fit(ones, s3, x3, 0.0);
  CHECK(c.coefficients(0) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(c.coefficients(1) == Catch::Approx(0.0).margin(1e-12));
  CHECK(c.residual_q == Catch::Approx(0.0).margin(1e-20));
}

TEST_CASE("wls_fit: intercept-only reduces to fixed-effect pooling", "[metareg]") {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto o = oracle::random_table(g, 1, 12);
    const auto f = wls_fit(o.y, o.s, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(o.y.size()), 1), 0.0);
    const auto fe = fixed_effect_pool(o.y, o.s);
    CHECK(f.coefficients(0) == Catch::Approx(fe.estimate).epsilon(1e-10).margin(1e-12));
    CHECK(f.cov(0, 0) == Catch::Approx(fe.se * fe.se).epsilon(1e-10));
    CHECK(f.residual_q == Catch::Approx(fe.q_stat).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("wls_fit errors", "[metareg]") {
  const std::vector<double> y{1, 2, 3}, s{1, 1, 1};
  Eigen::MatrixXd same(3, 2);
  same << 1, 5, 1, 5, 1, 5;
  CHECK(code_of([&] { wls_fit(y, s, same, 0.0); }) == ErrorCode::RankDeficient);
  Eigen::MatrixXd collinear(3, 3);
  collinear << 1, 1, 2, 1, 2, 4, 1, 3, 6;
  CHECK(code_of([&] { wls_fit(y, s, collinear, 0.0); }) == ErrorCode::RankDeficient);
  Eigen::MatrixXd wide(2, 3);
  wide << 1, 2, 3, 1, 4, 5;
  CHECK(code_of([&] { wls_fit(std::vector<double>{1, 2}, std::vector<double>{1, 1}, wide, 0.0); }) ==
        ErrorCode::TooFewStudies);
}

TEST_CASE("re_metareg_tau2 hand-computed cases", "[metareg]") {
  const std::vector<double> y{0, 2, 4}, s{1, 1, 1};
  CHECK(re_metareg_tau2(y, s, Eigen::MatrixXd::Ones(3, 1)) == Catch::Approx(3.0).epsilon(1e-12));

  std::vector<double> lin, se;
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 5; ++i) {
    lin.push_back(3.0 + 0.5 * i);
    se.push_back(0.4);
    x(i, 0) = 1;
    x(i, 1) = i;
  }
  CHECK(re_metareg_tau2(lin, se, x) == 0.0);

  Eigen::MatrixXd x2(2, 2);
  x2 << 1, 0, 1, 1;
  CHECK(code_of([&] { re_metareg_tau2(std::vector<double>{1, 2}, std::vector<double>{1, 1}, x2); }) ==
        ErrorCode::TooFewStudies);
}

TEST_CASE("re_metareg_tau2 matches the trace-formula oracle on 4-study tables", "[metareg][oracle]") {
  std::mt19937_64 g(17);
  for (int rep = 0; rep < 200; ++rep) {
    const auto o = oracle::random_table(g, 4, 4);
    const auto xm = design(o, 2);
    CHECK(oracle::rel_close(re_metareg_tau2(o.y, o.s, to_eigen(xm)), oracle::metareg_tau2(o.y, o.s, xm), 1e-10, 1.0));
  }
}

TEST_CASE("wls_fit and re_metareg_tau2 agree with naive oracles", "[metareg][oracle]") {
  std::mt19937_64 g(23);
  std::uniform_int_distribution<std::size_t> pd(1, 3);
  std::uniform_real_distribution<double> td(0.0, 2.0);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto o = oracle::random_table(g);
    const auto p = std::min(pd(g), o.y.size() - 1);
    const auto xm = design(o, p);
    const double tau2 = td(g);
    const auto f = wls_fit(o.y, o.s, to_eigen(xm), tau2);
    const auto w = oracle::wls(o.y, o.s, xm, tau2);
    for (std::size_t a = 0; a < p; ++a) {
      REQUIRE(oracle::rel_close(f.coefficients(static_cast<Eigen::Index>(a)), w.beta[a], 1e-10, 1.0));
      for (std::size_t b = 0; b < p; ++b)
        // off-diagonals are judged relative to the matching diagonal scale
        REQUIRE(oracle::rel_close(f.cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), w.cov[a][b], 1e-10,
                                  std::sqrt(w.cov[a][a] * w.cov[b][b])));
    }
    REQUIRE(oracle::rel_close(f.residual_q, w.residual_q, 1e-10, 1.0));
    REQUIRE(oracle::rel_close(re_metareg_tau2(o.y, o.s, to_eigen(xm)), oracle::metareg_tau2(o.y, o.s, xm), 1e-10, 1.0));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("regression fit invariants", "[metareg][property]") {
  std::mt19937_64 g(29);
  std::uniform_real_distribution<double> cd(-20, 20), sc(0.2, 5);
  for (int rep = 0; rep < 300; ++rep) {
    const auto o = oracle::random_table(g, 4, 12);
    const auto xm = to_eigen(design(o, 2));
    const auto f = wls_fit(o.y, o.s, xm, 0.0);
    CHECK((f.cov - f.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * f.cov.cwiseAbs().maxCoeff());
    CHECK(f.cov.diagonal().minCoeff() >= 0.0);

    // fitted value at the weighted-mean covariate row equals the weighted mean of y
    Eigen::VectorXd w(xm.rows());
    for (Eigen::Index i = 0; i < xm.rows(); ++i) w(i) = 1 / (o.s[i] * o.s[i]);
    const Eigen::RowVectorXd xbar = (w.transpose() * xm) / w.sum();
    double ybar = 0;
    for (std::size_t i = 0; i < o.y.size(); ++i) ybar += w(static_cast<Eigen::Index>(i)) * o.y[i];
    ybar /= w.sum();
    CHECK(xbar.dot(f.coefficients) == Catch::Approx(ybar).epsilon(1e-10).margin(1e-10));

    // shift moves only the intercept
    const double c = cd(g);
    auto ys = o.y;
    for (auto& v : ys) v += c;
    const auto fs = wls_fit(ys, o.s, xm, 0.0);
    CHECK(fs.coefficients(0) == Catch::Approx(f.coefficients(0) + c).margin(1e-9));
    CHECK(fs.coefficients(1) == Catch::Approx(f.coefficients(1)).margin(1e-9));
    CHECK(re_metareg_tau2(ys, o.s, xm) == Catch::Approx(re_metareg_tau2(o.y, o.s, xm)).epsilon(1e-9).margin(1e-12));

    // scale multiplies beta and sqrt(diag cov) by m, tau2 by m^2
    const double m = sc(g);
    auto ym = o.y, sm = o.s;
    for (auto& v : ym) v *= m;
    for (auto& v : sm) v *= m;
    const double t2 = re_metareg_tau2(o.y, o.s, xm);
    const double t2m = re_metareg_tau2(ym, sm, xm);
    CHECK(t2m == Catch::Approx(t2 * m * m).epsilon(1e-9).margin(1e-12));
    const auto fr = wls_fit(o.y, o.s, xm, t2);
    const auto frm = wls_fit(ym, sm, xm, t2m);
    for (Eigen::Index a = 0; a < 2; ++a) {
      CHECK(frm.coefficients(a) == Catch::Approx(fr.coefficients(a) * m).epsilon(1e-9).margin(1e-9));
      CHECK(std::sqrt(frm.cov(a, a)) == Catch::Approx(std::sqrt(fr.cov(a, a)) * m).epsilon(1e-9));
    }
  }
}

TEST_CASE("saturated indicator model reproduces subgroup fixed-effect pools", "[metareg][property]") {
  std::mt19937_64 g(31);
  std::uniform_int_distribution<int> nd(1, 5);
  std::uniform_real_distribution<double> ed(-2, 2), sd(0.05, 1.5);
  const char* levels[] = {"high", "unclear", "low"};
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Study> v;
    for (const char* l : levels)
      for (int i = nd(g); i > 0; --i) v.push_back(ord(ed(g), sd(g), l));
    std::shuffle(v.begin(), v.end(), g);
    const auto t = validate_table(v);
    const auto fit = fit_metareg(t, Encoding::OrdinalIndicator, IdealPoint::ordinal(rob()), PoolingMethod::FixedEffect);
    const auto d = build_design_matrix(t, Encoding::OrdinalIndicator, IdealPoint::ordinal(rob()));
    for (std::size_t li = 0; li < 3; ++li) {
      const auto sub = level_subset(t, li);
      const auto pool = fixed_effect_pool(sub);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(3);
      row(0) = 1;
      for (std::size_t c = 1; c < d.labels.size(); ++c)
        if (d.labels[c] == "I(" + rob()->level(li) + ")") row(static_cast<Eigen::Index>(c)) = 1;
      CHECK(row.dot(fit.coefficients) == Catch::Approx(pool.estimate).epsilon(1e-10).margin(1e-12));
      CHECK(row.dot(fit.cov * row) == Catch::Approx(pool.se * pool.se).epsilon(1e-10));
    }
  }
}

TEST_CASE("fit_metareg reductions", "[metareg]") {
  const auto t = validate_table({Study{"a", 0, 1, DesignQuality::numeric(0), {}}, Study{"b", 10, 1, DesignQuality::numeric(10), {}}});
  const auto fe = fit_metareg(t, Encoding::NumericLinear, IdealPoint::numeric(10), PoolingMethod::FixedEffect);
  CHECK(fe.coefficients(0) == Catch::Approx(0).margin(1e-12));
  CHECK(fe.coefficients(1) == Catch::Approx(1).epsilon(1e-12));
  CHECK(fe.tau2 == 0.0);
  CHECK(fe.encoding == Encoding::NumericLinear);
  CHECK(fe.ideal_row == Eigen::Vector2d(1, 10));

  // random-effects meta-regression on an intercept-only design is random-effects pooling
  const auto y = std::vector<double>{0, 2, 4}, s = std::vector<double>{1, 1, 1};
  const auto f = wls_fit(y, s, Eigen::MatrixXd::Ones(3, 1), re_metareg_tau2(y, s, Eigen::MatrixXd::Ones(3, 1)));
  const auto re = random_effects_pool(y, s);
  CHECK(f.coefficients(0) == Catch::Approx(re.estimate).epsilon(1e-12));
  CHECK(std::sqrt(f.cov(0, 0)) == Catch::Approx(re.se).epsilon(1e-12));
  CHECK(f.tau2 == Catch::Approx(re.tau2).epsilon(1e-12));
}
