#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modcausal/cohort.hpp"
#include "modcausal/config.hpp"
#include "modcausal/domain.hpp"
#include "modcausal/ingestion.hpp"
#include "modcausal/meta_learners.hpp"

namespace modcausal {

inline constexpr int kNumLags = kMaxLinkLag + 1;

/// Structural equations of a synthetic moderation world.
///
/// Per player: latent per-match stat means (shared skill factor plus noise) generate the
/// pre-report week; the realized covariates X drive everything downstream. With z the
/// covariates standardized by `cov_mean`/`cov_sd` and kd_z the standardized
/// eliminations/deaths ratio:
///   P(quick moderation | X) = sigmoid(assign_intercept + assign_coef'z)
///   quick players draw lag from lag_weights on 0..3, the rest from lag_weights on 4..14
///   W = lag <= treat_max_lag of target_setup
///   rate_w1 = rate_w0 + b_r0 + b_r_coef'z + W tau_r(X) + N(0, noise_r^2)
///   tau_r(X) = tau_r + tau_r_coef'z + tau_r_kd kd_z             (same shape for participation)
/// Report counts are stochastically rounded so that E[count | rate] = rate * matches.
struct SimConfig {
  int n_players = 5000;
  std::uint64_t seed = 1;
  DateRange range = default_study_range();
  Day voice_start = default_voice_start();
  SetupKind target_setup = SetupKind::QuickVsDelayed;

  CovariateVector cov_mean = {2200.0, 3.2, 15.5, 12.5, 42500.0, 77.9, 1660.0, 1400.0, 21.0};
  CovariateVector cov_sd = {450.0, 1.0, 3.5, 2.8, 8000.0, 8.0, 380.0, 300.0, 3.5};
  CovariateVector skill_loading = {0.6, 0.3, 0.6, -0.3, 0.1, 0.1, 0.6, -0.2, 0.4};
  double day_noise = 0.1;
  double match_rate = 2.0;  // matches on an active day = 1 + Poisson(match_rate)

  bool assign_intercept_auto = true;  // intercept = logit(lag mass on 0..3)
  double assign_intercept = 0.0;
  CovariateVector assign_coef = {0.0, 0.0, 0.4, -0.4, 0.0, 0.0, 0.3, -0.3, 0.2};

  double report_base = 1.0;
  double report_base_sd = 0.1;
  double b_r0 = 0.0;
  CovariateVector b_r_coef = {0.0, 0.0, -0.05, 0.05, 0.0, 0.0, -0.04, 0.04, 0.0};
  double noise_r = 0.1;
  double tau_r = -0.3;
  CovariateVector tau_r_coef{};
  double tau_r_kd = 0.0;

  double participation_base = 0.65;
  double participation_base_sd = 0.08;
  double b_p0 = -0.02;
  CovariateVector b_p_coef = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  double noise_p = 0.05;
  double tau_p = -0.05;
  CovariateVector tau_p_coef{};
  double tau_p_kd = 0.0;

  /// Indexed by OffenseType: Cheating, OffensiveTextChat, OffensiveUserID, OffensiveVoiceChat.
  std::array<double, 4> offense_weights = {0.062, 0.316, 0.088, 0.535};
  std::array<double, kNumLags> lag_weights = {0.30, 0.15, 0.10, 0.08, 0.03, 0.02, 0.02, 0.05,
                                              0.05, 0.04, 0.04, 0.03, 0.03, 0.03, 0.03};
  double kd_center = 1.24;
  double kd_scale = 0.35;

  void validate() const;
  double quick_lag_mass() const;
};

SimConfig sim_config_from(const KeyValueConfig& kv, SimConfig base = {});
void write_sim_config(std::ostream& out, const SimConfig& cfg);

struct PlayerTruth {
  PlayerId player_id;
  int lag = 0;
  int treated = 0;            // W under the target setup
  double propensity = 0.0;    // P(quick | X)
  double tau_report_rate = 0.0;
  double tau_participation = 0.0;
};

struct SimGroundTruth {
  SetupKind target_setup = SetupKind::QuickVsDelayed;
  std::vector<PlayerTruth> players;  // sorted by player_id
  double true_ate_report_rate = 0.0;
  double true_ate_participation = 0.0;

  const PlayerTruth& at(const PlayerId& id) const;
  /// Rebuilds the id lookup after `players` changes.
  void reindex();

 private:
  std::unordered_map<PlayerId, std::size_t> index_;
};

struct SimWorld {
  RawTables tables;
  SimGroundTruth truth;
};

/// Deterministic under config.seed. Throws if the study range cannot hold the windows.
SimWorld generate_world(const SimConfig& config);

/// Exact per-row effects for the given cohort rows; throws if a row's player is unknown.
std::pair<double, Vector> true_effects(const SimGroundTruth& truth, const CohortTable& cohort,
                                       const std::vector<std::size_t>& rows, Outcome outcome);
std::pair<double, Vector> true_effects(const SimGroundTruth& truth, const CohortTable& cohort,
                                       const EstimationData& data, Outcome outcome);

void write_truth_csv(std::ostream& out, const SimGroundTruth& truth);

/// Action multisets observed per offense with their relative frequency.
struct ActionFrequency {
  OffenseType offense;
  ActionMultiset actions;
  double ratio;
};
const std::vector<ActionFrequency>& observed_action_frequencies();

}  // namespace modcausal
