#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "metasurf/simulation.hpp"

using namespace metasurf;

TEST_CASE("sample_studies respects the DGP support", "[simulation]") {
  ScenarioParams p;
  p.delta = 0.8;
  p.n = 50;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    auto rng = seed_stream(1, p, rep);
    const auto t = sample_studies(p, rng);
    REQUIRE(t.size() == 50);
    for (const auto& s : t) {
      REQUIRE(s.quality.score() >= 0.0);
      REQUIRE(s.quality.score() <= 10.0);
      REQUIRE(s.se >= 0.1);
      // s = max(delta (10 - Z) + eps, 0.1) with |eps| < 0.6 at 6 sigma
      REQUIRE(s.se <= std::max(0.8 * (10 - s.quality.score()) + 0.6, 0.1));
    }
  }
}

TEST_CASE("sample_studies marginals over 1e5 draws", "[simulation]") {
  ScenarioParams p;
  p.n = 1000;
  double sz = 0, sr = 0, sr2 = 0;
  std::size_t count = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    auto rng = seed_stream(5, p, rep);
    for (const auto& s : sample_studies(p, rng)) {
      sz += s.quality.score();
      const double r = s.effect - (p.tau - p.gamma * (p.z_max - s.quality.score()));
      sr += r;
      sr2 += r * r;
      ++count;
    }
  }
  const double n = static_cast<double>(count);
  const double a = p.alpha, b = p.beta;
  const double mean_z = 10 * a / (a + b);
  const double sd_z = 10 * std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1)));
  CHECK(std::abs(sz / n - mean_z) < 3 * sd_z / std::sqrt(n));
  const double sd_r = std::sqrt(sr2 / n - (sr / n) * (sr / n));
  CHECK(std::abs(sd_r - 1.0) < 0.01);
}

TEST_CASE("slopes off decouple quality from effects and errors", "[simulation]") {
  ScenarioParams p;
  p.gamma = 0;
  p.delta = 0;
  p.n = 2000;
  auto rng = seed_stream(9, p, 0);
  const auto t = sample_studies(p, rng);
  double s = 0;
  std::size_t floored = 0;
  for (const auto& st : t) {
    s += st.effect;
    CHECK(st.se <= 0.1 + 0.6);
    floored += st.se == 0.1;
  }
  CHECK(std::abs(s / 2000 - 20.0) < 4 / std::sqrt(2000.0));
  // eps ~ N(0, 0.1): the floor binds when eps < 0.1, P = Phi(1) ~ 0.841
  CHECK(floored > 1600);
  CHECK(floored < 1760);
}

TEST_CASE("se floor is active at the ideal quality", "[simulation]") {
  ScenarioParams p;
  p.delta = 0.8;
  p.alpha = 200;  // Z concentrated near 10
  p.n = 500;
  auto rng = seed_stream(3, p, 0);
  std::size_t floored = 0;
  for (const auto& s : sample_studies(p, rng)) floored += s.se == 0.1;
  CHECK(floored > 0);

  p.alpha = 0.05;  // Z concentrated near 0: s near 8
  auto rng2 = seed_stream(3, p, 0);
  double max_se = 0;
  for (const auto& s : sample_studies(p, rng2)) max_se = std::max(max_se, s.se);
  CHECK(max_se > 7.5);
}

TEST_CASE("run_scenario is deterministic", "[simulation]") {
  ScenarioParams p;
  const auto a = run_scenario(p, {}, 4, 123);
  const auto b = run_scenario(p, {}, 4, 123);
  REQUIRE(a.methods.size() == 6);
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    CHECK(a.methods[i].failed == b.methods[i].failed);
    CHECK(a.methods[i].estimate == b.methods[i].estimate);
    CHECK(a.methods[i].ci.lower == b.methods[i].ci.lower);
  }
  const auto c = run_scenario(p, {}, 5, 123);
  CHECK(a.methods[0].estimate != c.methods[0].estimate);
}

TEST_CASE("null DGP gives mean-zero biases", "[simulation]") {
  ScenarioParams p;
  p.gamma = 0;
  p.delta = 0;
  p.n = 80;
  std::vector<double> fe, rsr;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto rec = run_scenario(p, {{Method::FE, Method::RSR}, 9, true}, r, 77);
    fe.push_back(rec.methods[0].bias);
    rsr.push_back(rec.methods[1].bias);
  }
  CHECK(std::abs(lower_median(fe)) < 0.1);
  CHECK(std::abs(lower_median(rsr)) < 0.3);
}

TEST_CASE("aggregation: coverage and median bias", "[simulation]") {
  auto rec = [](double est, double half, double tau) {
    MethodRecord m{Method::FE, "FE", false, est, {est - half, est + half, 0.95}, false, est - tau, {}};
    m.covered = m.ci.contains(tau);
    return m;
  };
  std::vector<MethodRecord> always, never;
  for (int i = 0; i < 20; ++i) {
    always.push_back(rec(20, 1e6, 20));
    never.push_back(rec(120, 1e-6, 20));
  }
  CHECK(*aggregate(always).coverage == 1.0);
  CHECK(*aggregate(never).coverage == 0.0);
  CHECK(*aggregate(never).median_bias == Catch::Approx(100));

  // lower median for even counts
  std::vector<MethodRecord> four{rec(1, 1, 0), rec(4, 1, 0), rec(2, 1, 0), rec(3, 1, 0)};
  CHECK(*aggregate(four).median_bias == 2.0);
  CHECK(lower_median({5, 1, 3}) == 3.0);

  // failures are counted but excluded
  auto failed = rec(0, 1, 0);
  failed.failed = true;
  four.push_back(failed);
  const auto a = aggregate(four);
  CHECK(a.n_failed == 1);
  CHECK(a.reps == 5);
  CHECK(*a.median_bias == 2.0);

  std::vector<MethodRecord> all_failed{failed, failed};
  const auto f = aggregate(all_failed);
  CHECK(!f.coverage.has_value());
  CHECK(!f.median_bias.has_value());
}

TEST_CASE("an unbiased oracle method has near-zero median bias", "[simulation]") {
  Stream s(12);
  std::vector<MethodRecord> recs;
  for (int i = 0; i < 2000; ++i) {
    const double est = 20 + s.normal();
    MethodRecord m{Method::RSF, "RSF", false, est, ConfidenceInterval::normal(est, 1.0), false, est - 20, {}};
    m.covered = m.ci.contains(20);
    recs.push_back(m);
  }
  const auto a = aggregate(recs);
  // median of N(0,1) has sd ~ 1.2533 / sqrt(n)
  CHECK(std::abs(*a.median_bias) < 3 * 1.2533 / std::sqrt(2000.0));
  CHECK(std::abs(*a.coverage - 0.95) < 3 * std::sqrt(0.95 * 0.05 / 2000));
}

TEST_CASE("degenerate sweep equals its single scenario", "[simulation]") {
  SweepSpec spec;
  spec.alpha_grid = {5};
  spec.gamma_grid = {2};
  spec.delta_grid = {0.2};
  spec.n_grid = {20};
  spec.reps = 1;
  spec.master_seed = 31;
  const auto g = run_sweep(spec);
  REQUIRE(g.cells.size() == 1);
  ScenarioParams p;
  const auto rec = run_scenario(p, {}, 0, 31);
  for (std::size_t i = 0; i < rec.methods.size(); ++i) {
    const auto& agg = g.cells[0].methods[i].agg;
    if (rec.methods[i].failed) {
      CHECK(agg.n_failed == 1);
      CHECK(!agg.median_bias);
    } else {
      CHECK(*agg.median_bias == rec.methods[i].bias);
      CHECK(*agg.coverage == (rec.methods[i].covered ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("sweep output is independent of thread count", "[simulation]") {
  SweepSpec spec;
  spec.alpha_grid = {2, 11};
  spec.gamma_grid = {0, 4};
  spec.delta_grid = {0.4};
  spec.n_grid = {20};
  spec.reps = 7;
  spec.master_seed = 2;
  spec.keep_records = true;
  std::ostringstream a, b, c, da, db;
  const auto serial = run_sweep(spec, 1);
  const auto par = run_sweep(spec, 4);
  write_sweep_csv(a, serial);
  write_sweep_csv(b, par);
  write_sweep_csv(c, run_sweep(spec, 3));
  write_sweep_detail_csv(da, serial);
  write_sweep_detail_csv(db, par);
  CHECK(a.str() == b.str());
  CHECK(a.str() == c.str());
  CHECK(da.str() == db.str());
  CHECK(a.str().rfind("alpha,gamma,delta,n,method,median_bias,coverage,n_failed,reps\n", 0) == 0);
}

TEST_CASE("invalid parameters are rejected", "[simulation]") {
  ScenarioParams p;
  p.n = 1;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.alpha = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  SweepSpec s;
  s.reps = 0;
  CHECK_THROWS_AS(run_sweep(s), Error);
  s = {};
  s.gamma_grid.clear();
  CHECK_THROWS_AS(run_sweep(s), Error);
}
