#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modcausal/cohort.hpp"
#include "modcausal/meta_learners.hpp"

namespace modcausal {

/// (mean_t - mean_c) / sqrt((var_t + var_c) / 2) with sample variances. Empty when the
/// pooled variance is zero.
std::optional<double> standardized_mean_difference(const std::vector<double>& treated,
                                                   const std::vector<double>& control);

struct MatchPair {
  Eigen::Index treated;
  Eigen::Index control;
};

/// For each treated row, the k control rows with the closest score, with replacement.
/// Equal distances go to the lower row index. Row indices refer to the score vector.
std::vector<MatchPair> knn_match(const Vector& scores, const Vector& treatment, int k);
inline std::vector<MatchPair> knn_match(const PropensityModel& ps, const Vector& treatment, int k) {
  return knn_match(ps.scores, treatment, k);
}

struct FeatureBalance {
  std::string feature;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  std::optional<double> smd_before;
  std::optional<double> smd_after;
};

struct BalanceReport {
  std::vector<FeatureBalance> features;
  std::vector<MatchPair> match_pairs;

  /// Mean absolute SMD over features where it is defined.
  double mean_abs_smd_before() const;
  double mean_abs_smd_after() const;
};

/// SMD per covariate before matching and between treated rows and their matched controls.
BalanceReport balance_report(const EstimationData& data, const PropensityModel& ps, int k = 1);

struct SkillIndicators {
  std::vector<double> ams;
  std::vector<std::optional<double>> dsi;
  std::vector<std::optional<double>> kd;
  long dsi_undefined = 0;
  long kd_undefined = 0;
};

/// AMS, damage-dealt over damage-taken, and eliminations over deaths from the per-match
/// covariate means of the pre-report week.
SkillIndicators compute_skill_indicators(const CohortTable& cohort);
SkillIndicators compute_skill_indicators(const CohortTable& cohort, const std::vector<std::size_t>& rows);

struct Correlation {
  std::optional<double> r;  // empty when either input has zero variance
  long n_used = 0;
};

/// Pearson r over pairs where the indicator is defined. Requires at least 3 pairs.
Correlation cate_feature_correlation(const Vector& cate, const std::vector<std::optional<double>>& indicator);
Correlation cate_feature_correlation(const Vector& cate, const std::vector<double>& indicator);

struct HeterogeneityRow {
  std::string indicator;
  Correlation corr;
};

/// Correlations of a CATE vector (aligned with data.rows) against AMS, DSI and K/D.
std::vector<HeterogeneityRow> heterogeneity_table(const CohortTable& cohort, const EstimationData& data,
                                                  const Vector& cate);

}  // namespace modcausal
