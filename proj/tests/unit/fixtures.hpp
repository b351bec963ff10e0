#pragma once

#include <random>

#include "modcausal/cohort.hpp"
#include "modcausal/ingestion.hpp"
#include "modcausal/meta_learners.hpp"

namespace fx {

using namespace modcausal;

inline Day day(const char* iso) { return parse_day(iso); }

inline CovariateVector stats(double base = 1.0) {
  CovariateVector v;
  for (std::size_t k = 0; k < kNumCovariates; ++k) v[k] = base + static_cast<double>(k);
  v[static_cast<std::size_t>(Covariate::Accuracy)] = 20.0;
  return v;
}

inline MatchDayRecord played(const PlayerId& p, Day d, std::uint32_t matches, CovariateVector s = stats()) {
  return {p, d, matches, s};
}

inline ReportEvent report(const PlayerId& p, Day d, OffenseType o = OffenseType::Cheating) {
  return {p, d, o, std::nullopt};
}

inline ModerationEvent moderation(const PlayerId& p, Day d, OffenseType o = OffenseType::Cheating,
                                  ActionMultiset a = {ModerationAction::RemoveFromLeaderboard}) {
  return {p, d, o, std::move(a), {}};
}

inline LinkedCase linked(const PlayerId& p, Day t, int lag, OffenseType o = OffenseType::Cheating) {
  LinkedCase c;
  c.player_id = p;
  c.report_date = t;
  c.moderation_date = t + lag;
  c.lag = lag;
  c.offense_type = o;
  c.actions = {ModerationAction::RemoveFromLeaderboard};
  c.severity = Severity::NotApplicable;
  c.covariates = stats();
  return c;
}

/// Rows with covariates x (n x p), treatment w and outcome y; baseline 1.
inline EstimationData data_from(const Matrix& x, const Vector& w, const Vector& y) {
  EstimationData d;
  d.x = x;
  d.w = w;
  d.y = y;
  d.baseline = Vector::Ones(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) d.rows.push_back(static_cast<std::size_t>(i));
  return d;
}

inline Matrix normal_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
  std::normal_distribution<double> nd;
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = nd(rng);
  return x;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double pearson(const Vector& a, const Vector& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  return cov / std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
}

}  // namespace fx
