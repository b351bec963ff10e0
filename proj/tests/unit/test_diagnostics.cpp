#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "modcausal/diagnostics.hpp"

using namespace modcausal;

TEST_CASE("standardized mean difference") {
  CHECK(*standardized_mean_difference({1, 2, 3}, {1, 2, 3}) == 0.0);
  // Sample variances 1 and 1.
  CHECK(*standardized_mean_difference({0, 1, 2}, {-1, 0, 1}) == doctest::Approx(1.0));
  CHECK_FALSE(standardized_mean_difference({1, 1}, {1, 1}));

  SUBCASE("score means from the balance table with fixture variances") {
    // Treated: moderated players, mean 2137.5. Control: unmoderated, mean 2156.4.
    const double sd_t = 410.0, sd_c = 455.0;
    const std::vector<double> t{2137.5 - sd_t, 2137.5 + sd_t};
    const std::vector<double> c{2156.4 - sd_c, 2156.4 + sd_c};
    // Two-point samples: sample variance = 2 sd^2.
    const double want = (2137.5 - 2156.4) / std::sqrt((2 * sd_t * sd_t + 2 * sd_c * sd_c) / 2.0);
    CHECK(*standardized_mean_difference(t, c) == doctest::Approx(want));
  }
}

TEST_CASE("nearest-neighbour matching") {
  SUBCASE("ties go to the lowest control index") {
    Vector s = Vector::Constant(5, 0.4);
    Vector w(5);
    w << 0, 1, 0, 1, 0;
    for (const auto& p : knn_match(s, w, 1)) CHECK(p.control == 0);
  }
  SUBCASE("nearest control wins") {
    Vector s(3), w(3);
    s << 0.2, 0.8, 0.75;
    w << 0, 0, 1;
    const auto pairs = knn_match(s, w, 1);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].treated == 2);
    CHECK(pairs[0].control == 1);
  }
  SUBCASE("k neighbours with replacement") {
    Vector s(4), w(4);
    s << 0.1, 0.5, 0.52, 0.9;
    w << 0, 1, 1, 0;
    const auto pairs = knn_match(s, w, 2);
    CHECK(pairs.size() == 4);
  }
}

TEST_CASE("balance improves after matching under confounding") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  const int n = 4000;
  Matrix x = fx::normal_matrix(rng, n, static_cast<Eigen::Index>(kNumCovariates));
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = u(rng) < fx::sigmoid(0.6 * x(i, 0) - 0.5 * x(i, 3) + 0.4 * x(i, 6) + 0.3 * x(i, 8));
  const auto data = fx::data_from(x, w, Vector::Zero(n));
  const auto rep = balance_report(data, estimate_propensity(data), 1);
  REQUIRE(rep.features.size() == kNumCovariates);
  int better = 0;
  for (const auto& f : rep.features) {
    REQUIRE(f.smd_before);
    REQUIRE(f.smd_after);
    CHECK(std::isfinite(*f.smd_after));
    better += std::abs(*f.smd_after) < std::abs(*f.smd_before);
  }
  CHECK(better >= 7);
  CHECK(rep.mean_abs_smd_after() < rep.mean_abs_smd_before());
  for (const auto& p : rep.match_pairs) {
    CHECK(w[p.treated] == 1);
    CHECK(w[p.control] == 0);
  }
}

TEST_CASE("skill indicators") {
  CohortTable t{StudySetup::moderation_vs_none(), {}, {}, {}, {}, 0};
  auto row = [](double done, double taken, double elim, double deaths) {
    CohortRow r;
    r.covariates = fx::stats();
    r.covariates[static_cast<std::size_t>(Covariate::DamageDone)] = done;
    r.covariates[static_cast<std::size_t>(Covariate::DamageTaken)] = taken;
    r.covariates[static_cast<std::size_t>(Covariate::Eliminations)] = elim;
    r.covariates[static_cast<std::size_t>(Covariate::Deaths)] = deaths;
    return r;
  };
  t.rows = {row(1600, 1280, 15.4, 11.7), row(1000, 0, 3, 0)};
  const auto s = compute_skill_indicators(t);
  CHECK(*s.dsi[0] == doctest::Approx(1.25));
  CHECK(*s.kd[0] == doctest::Approx(15.4 / 11.7));
  CHECK(*s.kd[0] == doctest::Approx(1.316).epsilon(1e-3));
  CHECK_FALSE(s.kd[1]);
  CHECK_FALSE(s.dsi[1]);
  CHECK(s.kd_undefined == 1);
  CHECK(s.dsi_undefined == 1);
  CHECK(s.ams.size() == 2);
}

TEST_CASE("cate correlation") {
  Vector ind(6);
  ind << 1, 2, 3, 5, 8, 13;
  std::vector<double> iv(ind.data(), ind.data() + ind.size());
  CHECK(*cate_feature_correlation(2.0 * ind.array() + 1.0, iv).r == doctest::Approx(1.0));
  CHECK(*cate_feature_correlation(-ind, iv).r == doctest::Approx(-1.0));
  std::vector<std::optional<double>> gappy{1.0, std::nullopt, 3.0, 5.0, std::nullopt, 13.0};
  const auto c = cate_feature_correlation(ind, gappy);
  CHECK(c.n_used == 4);
  CHECK_FALSE(cate_feature_correlation(Vector::Ones(6), iv).r);
}
