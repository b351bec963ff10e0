#include "modcausal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace modcausal {

namespace {

std::pair<double, double> mean_var(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, ss / (n - 1.0)};
}

}  // namespace

std::optional<double> standardized_mean_difference(const std::vector<double>& treated,
                                                   const std::vector<double>& control) {
  if (treated.empty() || control.empty()) throw std::invalid_argument("smd: both groups must be non-empty");
  const auto [mt, vt] = mean_var(treated);
  const auto [mc, vc] = mean_var(control);
  const double pooled = (vt + vc) / 2.0;
  if (!(pooled > 0.0)) return std::nullopt;
  return (mt - mc) / std::sqrt(pooled);
}

std::vector<MatchPair> knn_match(const Vector& scores, const Vector& treatment, int k) {
  if (scores.size() != treatment.size()) throw std::invalid_argument("knn_match: size mismatch");
  if (k < 1) throw std::invalid_argument("knn_match: k must be >= 1");
  std::vector<Eigen::Index> controls, treated;
  for (Eigen::Index i = 0; i < scores.size(); ++i) (treatment[i] == 1.0 ? treated : controls).push_back(i);
  if (treated.empty() || controls.empty()) throw std::invalid_argument("knn_match: both arms must be non-empty");
  if (static_cast<std::size_t>(k) > controls.size())
    throw std::invalid_argument("knn_match: k exceeds control arm size");

  // Controls sorted by (score, index).
  std::sort(controls.begin(), controls.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
  });
  std::vector<double> sorted_scores(controls.size());
  for (std::size_t j = 0; j < controls.size(); ++j) sorted_scores[j] = scores[controls[j]];

  std::vector<MatchPair> out;
  out.reserve(treated.size() * static_cast<std::size_t>(k));
  std::vector<std::pair<double, Eigen::Index>> cand;
  for (auto t : treated) {
    const double s = scores[t];
    const auto pos = static_cast<std::ptrdiff_t>(
        std::lower_bound(sorted_scores.begin(), sorted_scores.end(), s) - sorted_scores.begin());
    std::ptrdiff_t left = pos - 1, right = pos;
    const auto n = static_cast<std::ptrdiff_t>(controls.size());
    cand.clear();
    double kth = -1.0;
    // Expand outward; once k are collected keep taking candidates tied with the k-th distance.
    for (;;) {
      const double dl = left >= 0 ? s - sorted_scores[left] : INFINITY;
      const double dr = right < n ? sorted_scores[right] - s : INFINITY;
      const double d = std::min(dl, dr);
      if (!std::isfinite(d)) break;
      if (static_cast<int>(cand.size()) >= k && d > kth) break;
      if (dl <= dr) {
        cand.emplace_back(dl, controls[left--]);
      } else {
        cand.emplace_back(dr, controls[right++]);
      }
      if (static_cast<int>(cand.size()) == k) kth = cand.back().first;
      if (static_cast<int>(cand.size()) > k) kth = std::max(kth, cand.back().first);
    }
    std::sort(cand.begin(), cand.end());
    for (int j = 0; j < k; ++j) out.push_back({t, cand[static_cast<std::size_t>(j)].second});
  }
  return out;
}

double BalanceReport::mean_abs_smd_before() const {
  double s = 0.0;
  int n = 0;
  for (const auto& f : features)
    if (f.smd_before) {
      s += std::abs(*f.smd_before);
      ++n;
    }
  return n ? s / n : 0.0;
}

double BalanceReport::mean_abs_smd_after() const {
  double s = 0.0;
  int n = 0;
  for (const auto& f : features)
    if (f.smd_after) {
      s += std::abs(*f.smd_after);
      ++n;
    }
  return n ? s / n : 0.0;
}

BalanceReport balance_report(const EstimationData& data, const PropensityModel& ps, int k) {
  BalanceReport rep;
  rep.match_pairs = knn_match(ps, data.w, k);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    std::vector<double> t, c, matched_t, matched_c;
    for (Eigen::Index i = 0; i < data.size(); ++i) (data.w[i] == 1.0 ? t : c).push_back(data.x(i, j));
    for (const auto& p : rep.match_pairs) {
      matched_t.push_back(data.x(p.treated, j));
      matched_c.push_back(data.x(p.control, j));
    }
    FeatureBalance fb;
    fb.feature = j < static_cast<Eigen::Index>(kNumCovariates) ? std::string(kCovariateNames[j])
                                                               : "x" + std::to_string(j);
    fb.mean_treated = std::accumulate(t.begin(), t.end(), 0.0) / t.size();
    fb.mean_control = std::accumulate(c.begin(), c.end(), 0.0) / c.size();
    fb.smd_before = standardized_mean_difference(t, c);
    fb.smd_after = standardized_mean_difference(matched_t, matched_c);
    rep.features.push_back(std::move(fb));
  }
  return rep;
}

SkillIndicators compute_skill_indicators(const CohortTable& cohort, const std::vector<std::size_t>& rows) {
  SkillIndicators s;
  auto at = [](const CohortRow& r, Covariate c) { return r.covariates[static_cast<std::size_t>(c)]; };
  for (auto i : rows) {
    const auto& r = cohort.rows.at(i);
    s.ams.push_back(at(r, Covariate::MatchScore));
    const double taken = at(r, Covariate::DamageTaken);
    if (taken > 0.0) {
      s.dsi.emplace_back(at(r, Covariate::DamageDone) / taken);
    } else {
      s.dsi.emplace_back(std::nullopt);
      ++s.dsi_undefined;
    }
    const double deaths = at(r, Covariate::Deaths);
    if (deaths > 0.0) {
      s.kd.emplace_back(at(r, Covariate::Eliminations) / deaths);
    } else {
      s.kd.emplace_back(std::nullopt);
      ++s.kd_undefined;
    }
  }
  return s;
}

SkillIndicators compute_skill_indicators(const CohortTable& cohort) {
  std::vector<std::size_t> rows(cohort.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  return compute_skill_indicators(cohort, rows);
}

Correlation cate_feature_correlation(const Vector& cate, const std::vector<std::optional<double>>& indicator) {
  if (static_cast<std::size_t>(cate.size()) != indicator.size())
    throw std::invalid_argument("cate_feature_correlation: size mismatch");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < indicator.size(); ++i)
    if (indicator[i] && std::isfinite(cate[static_cast<Eigen::Index>(i)])) {
      a.push_back(cate[static_cast<Eigen::Index>(i)]);
      b.push_back(*indicator[i]);
    }
  Correlation out;
  out.n_used = static_cast<long>(a.size());
  if (a.size() < 3) throw std::invalid_argument("cate_feature_correlation: need at least 3 defined pairs");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return out;
  out.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return out;
}

Correlation cate_feature_correlation(const Vector& cate, const std::vector<double>& indicator) {
  std::vector<std::optional<double>> ind(indicator.begin(), indicator.end());
  return cate_feature_correlation(cate, ind);
}

std::vector<HeterogeneityRow> heterogeneity_table(const CohortTable& cohort, const EstimationData& data,
                                                  const Vector& cate) {
  const auto s = compute_skill_indicators(cohort, data.rows);
  std::vector<HeterogeneityRow> out;
  out.push_back({"AMS", cate_feature_correlation(cate, s.ams)});
  out.push_back({"DSI", cate_feature_correlation(cate, s.dsi)});
  out.push_back({"KD", cate_feature_correlation(cate, s.kd)});
  return out;
}

}  // namespace modcausal
