#include <doctest.h>

#include <sstream>

#include "modcausal/sim.hpp"

using namespace modcausal;

namespace {

std::string dump(const SimWorld& w) {
  std::ostringstream o;
  write_reports_csv(o, w.tables.reports);
  write_moderations_csv(o, w.tables.moderations);
  write_matches_csv(o, w.tables.match_days);
  write_truth_csv(o, w.truth);
  return o.str();
}

struct Built {
  SimWorld world;
  CohortTable cohort;
  EstimationData data;
};

Built build(const SimConfig& cfg, Outcome outcome = Outcome::ReportRate) {
  auto world = generate_world(cfg);
  const auto cases = link_cases(world.tables);
  const EventLog log(world.tables, cfg.range);
  auto cohort = build_cohort(cases, StudySetup::from_kind(cfg.target_setup), log);
  auto data = make_estimation_data(cohort, outcome);
  return {std::move(world), std::move(cohort), std::move(data)};
}

}  // namespace

TEST_CASE("generation is deterministic under the seed") {
  SimConfig cfg;
  cfg.n_players = 100;
  cfg.seed = 42;
  const auto a = dump(generate_world(cfg));
  CHECK(a == dump(generate_world(cfg)));
  cfg.seed = 43;
  CHECK(a != dump(generate_world(cfg)));
}

TEST_CASE("generated tables are valid and every player is linked") {
  SimConfig cfg;
  cfg.n_players = 300;
  const auto w = generate_world(cfg);
  CHECK_NOTHROW(w.tables.validate());
  CHECK(link_cases(w.tables).size() == 300);
  CHECK(w.truth.players.size() == 300);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.noise_r = -1;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.offense_weights = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("config file round trip") {
  SimConfig cfg;
  cfg.n_players = 777;
  cfg.tau_r = -0.12;
  cfg.tau_r_kd = -0.05;
  std::stringstream s;
  write_sim_config(s, cfg);
  const auto back = sim_config_from(KeyValueConfig::parse(s));
  CHECK(back.n_players == 777);
  CHECK(back.tau_r == -0.12);
  CHECK(back.tau_r_kd == -0.05);
  CHECK(back.lag_weights == cfg.lag_weights);

  std::istringstream bad("n_playerz = 5\n");
  CHECK_THROWS(sim_config_from(KeyValueConfig::parse(bad)));
}

TEST_CASE("true effects") {
  SimConfig cfg;
  cfg.n_players = 1500;
  SUBCASE("constant effect") {
    cfg.tau_r = -0.25;
    const auto b = build(cfg);
    const auto [ate, cate] = true_effects(b.world.truth, b.cohort, b.data, Outcome::ReportRate);
    CHECK(ate == -0.25);
    CHECK((cate.array() == -0.25).all());
  }
  SUBCASE("effect equal to the first standardized covariate") {
    cfg.tau_r = 0.0;
    cfg.tau_r_coef = {};
    cfg.tau_r_coef[0] = 1.0;
    const auto b = build(cfg);
    const auto [ate, cate] = true_effects(b.world.truth, b.cohort, b.data, Outcome::ReportRate);
    for (Eigen::Index i = 0; i < cate.size(); ++i) {
      const double x1 = b.cohort.rows[b.data.rows[static_cast<std::size_t>(i)]].covariates[0];
      CHECK(cate[i] == doctest::Approx((x1 - cfg.cov_mean[0]) / cfg.cov_sd[0]).epsilon(1e-9));
    }
  }
  SUBCASE("mixed effect: the ATE is the CATE mean") {
    cfg.tau_p_coef[2] = 0.03;
    cfg.tau_p_kd = -0.02;
    const auto b = build(cfg, Outcome::Participation);
    const auto [ate, cate] = true_effects(b.world.truth, b.cohort, b.data, Outcome::Participation);
    CHECK(std::abs(ate - cate.mean()) < 1e-12);
  }
}

TEST_CASE("null world: DR recovers zero") {
  SimConfig cfg;
  cfg.n_players = 10000;
  cfg.seed = 7;
  cfg.tau_r = 0.0;
  const auto b = build(cfg);
  EstimatorConfig ec;
  ec.base = LearnerSpec::linear();
  const auto est = dr_learner_ate(b.data, ec, fit_propensity(b.data, ec));
  CHECK(std::abs(est.ate) < 0.03);
}

TEST_CASE("observed action frequencies") {
  double cheating = 0.0;
  for (const auto& row : observed_action_frequencies())
    if (row.offense == OffenseType::Cheating) cheating += row.ratio;
  CHECK(cheating == doctest::Approx(1.0).epsilon(0.01));
}
