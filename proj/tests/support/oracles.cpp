#include "oracles.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace oracle {

std::vector<LinkedCase> brute_force_link(const RawTables& raw) {
  // Merged moderation events keyed by (player, offense, day).
  struct Mod {
    PlayerId player;
    OffenseType offense;
    Day day;
    ActionMultiset actions;
  };
  std::vector<Mod> mods;
  for (const auto& m : raw.moderations) {
    bool merged = false;
    for (auto& x : mods)
      if (x.player == m.player_id && x.offense == m.offense_type && x.day == m.moderation_date) {
        x.actions.merge(m.actions);
        merged = true;
      }
    if (!merged) mods.push_back({m.player_id, m.offense_type, m.moderation_date, m.actions});
  }

  // Every report picks the moderation with the smallest non-negative lag up to 14.
  std::vector<std::optional<Day>> earliest(mods.size());
  for (const auto& r : raw.reports) {
    int best = -1;
    int best_lag = 1000;
    for (std::size_t j = 0; j < mods.size(); ++j) {
      if (mods[j].player != r.player_id || mods[j].offense != r.offense_type) continue;
      const int lag = days_between(r.report_date, mods[j].day);
      if (lag < 0 || lag > 14) continue;
      if (lag < best_lag) {
        best_lag = lag;
        best = static_cast<int>(j);
      }
    }
    if (best < 0) continue;
    auto& e = earliest[static_cast<std::size_t>(best)];
    if (!e || r.report_date < *e) e = r.report_date;
  }

  std::set<PlayerId> players;
  for (const auto& m : mods) players.insert(m.player);
  std::vector<LinkedCase> out;
  for (const auto& p : players) {
    int pick = -1;
    for (std::size_t j = 0; j < mods.size(); ++j) {
      if (mods[j].player != p || !earliest[j]) continue;
      if (pick < 0) {
        pick = static_cast<int>(j);
        continue;
      }
      const auto& a = mods[j];
      const auto& b = mods[static_cast<std::size_t>(pick)];
      const bool better =
          a.day < b.day ||
          (a.day == b.day && (*earliest[j] < *earliest[static_cast<std::size_t>(pick)] ||
                              (*earliest[j] == *earliest[static_cast<std::size_t>(pick)] && a.offense < b.offense)));
      if (better) pick = static_cast<int>(j);
    }
    if (pick < 0) continue;
    const auto& m = mods[static_cast<std::size_t>(pick)];
    LinkedCase c;
    c.player_id = p;
    c.report_date = *earliest[static_cast<std::size_t>(pick)];
    c.moderation_date = m.day;
    c.lag = days_between(c.report_date, c.moderation_date);
    c.offense_type = m.offense;
    c.actions = m.actions;
    c.severity = try_classify_severity(m.offense, m.actions);

    // Covariates: match-weighted means of the daily means over [T-7, T-1].
    CovariateVector sum{};
    double n = 0.0;
    for (const auto& d : raw.match_days) {
      if (d.player_id != p || d.matches_played == 0) continue;
      const int off = days_between(d.date, c.report_date);
      if (off < 1 || off > 7) continue;
      for (std::size_t k = 0; k < kNumCovariates; ++k) sum[k] += d.matches_played * (*d.stats)[k];
      n += d.matches_played;
    }
    if (n > 0.0) {
      for (auto& v : sum) v /= n;
      c.covariates = sum;
    }
    out.push_back(std::move(c));
  }
  return out;
}

WindowScan scan_window(const RawTables& raw, const PlayerId& p, Day from, Day to) {
  WindowScan s;
  for (const auto& r : raw.reports)
    if (r.player_id == p && r.report_date >= from && r.report_date <= to) ++s.reports;
  for (const auto& d : raw.match_days)
    if (d.player_id == p && d.date >= from && d.date <= to && d.matches_played > 0) {
      s.matches += d.matches_played;
      ++s.active_days;
    }
  return s;
}

std::optional<double> naive_delta_report_rate(const RawTables& raw, const PlayerId& p, Day w0, Day w1) {
  const auto a = scan_window(raw, p, w0, w0 + 6);
  const auto b = scan_window(raw, p, w1, w1 + 6);
  if (a.matches == 0 || b.matches == 0) return std::nullopt;
  return static_cast<double>(b.reports) / static_cast<double>(b.matches) -
         static_cast<double>(a.reports) / static_cast<double>(a.matches);
}

double naive_delta_participation(const RawTables& raw, const PlayerId& p, Day w0, Day w1) {
  const auto a = scan_window(raw, p, w0, w0 + 6);
  const auto b = scan_window(raw, p, w1, w1 + 6);
  return b.active_days / 7.0 - a.active_days / 7.0;
}

double aipw_direct(const std::vector<double>& w, const std::vector<double>& y, const std::vector<double>& e,
                   const std::vector<double>& mu1, const std::vector<double>& mu0) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const long double first = (w[i] * y[i] - (w[i] - e[i]) * mu1[i]) / e[i];
    const long double second = ((1.0 - w[i]) * y[i] + (w[i] - e[i]) * mu0[i]) / (1.0 - e[i]);
    total += first - second;
  }
  return static_cast<double>(total / static_cast<long double>(w.size()));
}

std::vector<double> closed_form_ridge(const Matrix& x, const Vector& y, double l2) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t p = static_cast<std::size_t>(x.cols()) + 1;
  // Augmented normal equations [A | b] with a leading column of ones.
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  auto feat = [&](std::size_t i, std::size_t j) -> long double {
    return j == 0 ? 1.0L : static_cast<long double>(x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)));
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < p; ++k) a[j][k] += feat(i, j) * feat(i, k);
      a[j][p] += feat(i, j) * static_cast<long double>(y[static_cast<Eigen::Index>(i)]);
    }
  for (std::size_t j = 1; j < p; ++j) a[j][j] += l2;
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::fabs(static_cast<double>(a[r][c])) > std::fabs(static_cast<double>(a[piv][c]))) piv = r;
    std::swap(a[c], a[piv]);
    if (a[c][c] == 0.0L) throw std::runtime_error("closed_form_ridge: singular system");
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> out(p);
  for (std::size_t j = 0; j < p; ++j) out[j] = static_cast<double>(a[j][p] / a[j][j]);
  return out;
}

}  // namespace oracle
