#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "modcausal/cohort.hpp"
#include "modcausal/learners.hpp"

namespace modcausal {

enum class Outcome { ReportRate, Participation };
std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);

/// Design matrix and outcome for one analysis. Rows whose outcome is undefined are dropped.
struct EstimationData {
  Matrix x;
  Vector w;
  Vector y;
  Vector baseline;                // baseline level of the same outcome, per row
  std::vector<std::size_t> rows;  // index into CohortTable::rows

  Eigen::Index size() const { return y.size(); }
  long n_treated() const;
  long n_control() const;
  EstimationData subset(const std::vector<Eigen::Index>& idx) const;
};

EstimationData make_estimation_data(const CohortTable& cohort, Outcome outcome);

struct ClipBounds {
  double lo = 0.01;
  double hi = 0.99;
};

struct PropensityModel {
  std::shared_ptr<const ProbClassifier> classifier;  // null when built from fixed scores
  ClipBounds clip;
  Vector scores;  // clipped
};

PropensityModel estimate_propensity(const EstimationData& data, ClipBounds clip = {},
                                    const LogisticParams& params = {}, const Vector* warm_start = nullptr);
PropensityModel estimate_propensity(const CohortTable& cohort, ClipBounds clip = {});
/// Wraps externally supplied scores (e.g. a deliberately misspecified constant).
PropensityModel propensity_from_scores(Vector scores, ClipBounds clip = {});

enum class PropensityMode { Logistic, Constant };

struct EstimatorConfig {
  LearnerSpec base = LearnerSpec::gbt_default();
  LearnerSpec effect = LearnerSpec::linear();
  LogisticParams propensity;
  ClipBounds clip;
  PropensityMode propensity_mode = PropensityMode::Logistic;
  bool x_use_propensity = true;
  bool dr_cross_fit = false;
  std::uint64_t seed = 0;
};

PropensityModel fit_propensity(const EstimationData& data, const EstimatorConfig& cfg,
                               const Vector* warm_start = nullptr);

struct EffectEstimate {
  std::string estimator;
  double ate = 0.0;
  double ate_relative = 0.0;  // percent of control-arm baseline
  double ci_low = 0.0, ci_high = 0.0;
  double ci_low_relative = 0.0, ci_high_relative = 0.0;
  double baseline_mean = 0.0;
  Vector cate;
  long n_treated = 0, n_control = 0;
  int bootstrap_reps = 0;
  long dropped_rows = 0;  // R-learner: rows with vanishing treatment residual
};

enum class EstimatorKind { T, S, X, R, DR };
inline constexpr std::array<EstimatorKind, 5> kAllEstimators = {EstimatorKind::T, EstimatorKind::S, EstimatorKind::X,
                                                                EstimatorKind::R, EstimatorKind::DR};
std::string_view to_string(EstimatorKind k);
EstimatorKind parse_estimator(std::string_view s);

EffectEstimate t_learner(const EstimationData& data, const EstimatorConfig& cfg);
EffectEstimate s_learner(const EstimationData& data, const EstimatorConfig& cfg);
EffectEstimate x_learner(const EstimationData& data, const EstimatorConfig& cfg, const PropensityModel& ps,
                         bool use_propensity_weighting);
EffectEstimate r_learner(const EstimationData& data, const EstimatorConfig& cfg, const PropensityModel& ps);
/// ATE from the AIPW average; `cate` holds the per-row doubly robust scores.
EffectEstimate dr_learner_ate(const EstimationData& data, const EstimatorConfig& cfg, const PropensityModel& ps);
/// Second-stage regression of the doubly robust scores on X; ATE = mean of the scores.
EffectEstimate dr_learner_cate(const EstimationData& data, const EstimatorConfig& cfg, const PropensityModel& ps);

/// (1/N) sum [ (W Y - (W - e) mu1) / e - ((1 - W) Y + (W - e) mu0) / (1 - e) ].
/// Throws if any score is 0 or 1.
double dr_ate_formula(const Vector& w, const Vector& y, const Vector& e, const Vector& mu1, const Vector& mu0);
/// mu1 - mu0 + W (Y - mu1) / e - (1 - W)(Y - mu0) / (1 - e), per row.
Vector dr_pseudo_outcomes(const Vector& w, const Vector& y, const Vector& e, const Vector& mu1, const Vector& mu0);

/// Runs one estimator; `ate_only` lets the DR learner skip its second stage.
EffectEstimate run_estimator(EstimatorKind kind, const EstimationData& data, const EstimatorConfig& cfg,
                             const PropensityModel& ps, bool ate_only = false);

/// Mean baseline of the control arm.
double control_baseline_mean(const EstimationData& data);
/// 100 * value / baseline_mean. Throws if |baseline_mean| < 1e-9.
double relative_effect(double value, double baseline_mean);
/// Fills ate_relative and the relative CI fields from the absolute ones.
void apply_relative_effect(EffectEstimate& est, const EstimationData& data);

struct BootstrapOptions {
  int reps = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct BootstrapInterval {
  double low = 0.0, high = 0.0;
  bool widened = false;  // percentile interval was extended to reach the point estimate
};

struct BootstrapResult {
  std::vector<BootstrapInterval> intervals;  // one per requested estimator
  std::vector<std::vector<double>> replicates;
  int redraws = 0;
};

/// Stratified (by arm) nonparametric bootstrap with percentile intervals. Every replicate
/// refits propensity and the estimator. Replicate r draws from a generator seeded by
/// (seed, r), so results do not depend on thread count.
BootstrapResult bootstrap_ci(const EstimationData& data, const std::vector<EstimatorKind>& kinds,
                             const std::vector<double>& point_estimates, const EstimatorConfig& cfg,
                             const BootstrapOptions& opts);
BootstrapInterval bootstrap_ci(const EstimationData& data, EstimatorKind kind, double point_estimate,
                               const EstimatorConfig& cfg, const BootstrapOptions& opts);

/// Point estimate plus bootstrap interval plus relative scaling.
EffectEstimate estimate_with_ci(EstimatorKind kind, const EstimationData& data, const EstimatorConfig& cfg,
                                const BootstrapOptions& opts);

struct CateSummary {
  std::string estimator;
  double mean = 0.0;
  double mode = 0.0;  // peak of a Gaussian kernel density estimate
  double sd = 0.0;
  double q25 = 0.0, q75 = 0.0;
  double iqr = 0.0;
};

CateSummary summarize_cate(const std::string& name, const Vector& cate);
std::vector<CateSummary> compare_meta_learners(const EstimationData& data, const EstimatorConfig& cfg);

/// Type-7 sample quantile of already sorted values.
double sorted_quantile(const std::vector<double>& sorted, double q);

/// SplitMix64-based derivation of child seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace modcausal
