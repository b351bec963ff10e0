#include "modcausal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "csv.hpp"

namespace modcausal {

namespace {

using MA = ModerationAction;
using OT = OffenseType;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

const std::vector<ActionFrequency>& observed_action_frequencies() {
  static const std::vector<ActionFrequency> table = {
      {OT::Cheating, {MA::RemoveFromLeaderboard}, 0.9737},
      {OT::Cheating, {MA::RankingService, MA::RemoveFromLeaderboard}, 0.0263},
      {OT::OffensiveTextChat, {MA::FeatureFlag}, 0.0009},
      {OT::OffensiveTextChat, {MA::PenaltyNotice}, 0.0005},
      {OT::OffensiveTextChat, {MA::PenaltyNotice, MA::FeatureFlag}, 0.9955},
      {OT::OffensiveTextChat, {MA::WarningNotice, MA::FeatureFlag}, 0.0031},
      {OT::OffensiveUserID, {MA::DeleteProfile, MA::RenameUser, MA::LimitAllowedRenames}, 0.0001},
      {OT::OffensiveUserID, {MA::DeleteProfile, MA::RenameUser, MA::LimitAllowedRenames, MA::RemoveClantag}, 0.0023},
      {OT::OffensiveUserID, {MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice, MA::FeatureFlag}, 0.0003},
      {OT::OffensiveUserID, {MA::WarningNotice}, 0.0019},
      {OT::OffensiveUserID, {MA::RenameUser, MA::LimitAllowedRenames}, 0.0115},
      {OT::OffensiveUserID, {MA::RenameUser, MA::LimitAllowedRenames, MA::PenaltyNotice, MA::FeatureFlag}, 0.0010},
      {OT::OffensiveUserID, {MA::RenameUser, MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice}, 0.0549},
      {OT::OffensiveUserID,
       {MA::RenameUser, MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice, MA::FeatureFlag},
       0.9281},
      {OT::OffensiveVoiceChat, {MA::FeatureFlag}, 0.2675},
      {OT::OffensiveVoiceChat, {MA::FeatureFlag, MA::FeatureFlag, MA::PenaltyNotice}, 0.4178},
      {OT::OffensiveVoiceChat, {MA::FeatureFlag, MA::PenaltyNotice}, 0.0001},
      {OT::OffensiveVoiceChat, {MA::WarningNotice}, 0.0001},
      {OT::OffensiveVoiceChat, {MA::WarningNotice, MA::FeatureFlag}, 0.3146},
  };
  return table;
}

// ---------------------------------------------------------------------------------------
// Config

double SimConfig::quick_lag_mass() const {
  return std::accumulate(lag_weights.begin(), lag_weights.begin() + 4, 0.0);
}

void SimConfig::validate() const {
  if (n_players < 1) throw std::invalid_argument("sim: n_players must be >= 1");
  // Published percentages are rounded; draws normalise by the actual total.
  auto near_one = [](double s) { return std::abs(s - 1.0) <= 0.005; };
  for (double w : offense_weights)
    if (w < 0.0) throw std::invalid_argument("sim: offense weights must be non-negative");
  if (!near_one(std::accumulate(offense_weights.begin(), offense_weights.end(), 0.0)))
    throw std::invalid_argument("sim: offense weights must sum to 1");
  for (double w : lag_weights)
    if (w < 0.0) throw std::invalid_argument("sim: lag weights must be non-negative");
  if (!near_one(std::accumulate(lag_weights.begin(), lag_weights.end(), 0.0)))
    throw std::invalid_argument("sim: lag weights must sum to 1");
  const double quick = quick_lag_mass();
  if (quick <= 0.0 || quick >= 1.0) throw std::invalid_argument("sim: lag weights need mass on both 0..3 and 4..14");
  if (noise_r < 0.0 || noise_p < 0.0 || day_noise < 0.0 || report_base_sd < 0.0 || participation_base_sd < 0.0)
    throw std::invalid_argument("sim: noise scales must be non-negative");
  for (double s : cov_sd)
    if (!(s > 0.0)) throw std::invalid_argument("sim: covariate sds must be positive");
  for (double l : skill_loading)
    if (std::abs(l) > 1.0) throw std::invalid_argument("sim: skill loadings must lie in [-1, 1]");
  if (!(kd_scale > 0.0)) throw std::invalid_argument("sim: kd_scale must be positive");
  if (match_rate < 0.0) throw std::invalid_argument("sim: match_rate must be non-negative");
  if (range.end < range.start) throw std::invalid_argument("sim: empty study range");
}

namespace {

template <std::size_t N>
void read_array(const KeyValueConfig& kv, const std::string& key, std::array<double, N>& out) {
  if (auto v = kv.get_vector(key)) {
    if (v->size() != N)
      throw std::invalid_argument("config key '" + key + "' needs " + std::to_string(N) + " values");
    std::copy(v->begin(), v->end(), out.begin());
  }
}

void read_double(const KeyValueConfig& kv, const std::string& key, double& out) {
  if (auto v = kv.get_double(key)) out = *v;
}

template <std::size_t N>
void write_array(std::ostream& out, const char* key, const std::array<double, N>& v) {
  out << key << " = ";
  for (std::size_t i = 0; i < N; ++i) out << (i ? "," : "") << csv::format_double(v[i]);
  out << '\n';
}

}  // namespace

SimConfig sim_config_from(const KeyValueConfig& kv, SimConfig c) {
  if (auto v = kv.get_int("n_players")) c.n_players = static_cast<int>(*v);
  if (auto v = kv.get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = kv.get_string("start")) c.range.start = parse_day(*v);
  if (auto v = kv.get_string("end")) c.range.end = parse_day(*v);
  if (auto v = kv.get_string("voice_start")) c.voice_start = parse_day(*v);
  if (auto v = kv.get_string("target_setup")) c.target_setup = parse_setup(*v);
  read_array(kv, "cov_mean", c.cov_mean);
  read_array(kv, "cov_sd", c.cov_sd);
  read_array(kv, "skill_loading", c.skill_loading);
  read_double(kv, "day_noise", c.day_noise);
  read_double(kv, "match_rate", c.match_rate);
  if (auto v = kv.get_string("assign_intercept")) {
    if (*v == "auto") {
      c.assign_intercept_auto = true;
    } else {
      c.assign_intercept_auto = false;
      c.assign_intercept = *kv.get_double("assign_intercept");
    }
  }
  read_array(kv, "assign_coef", c.assign_coef);
  read_double(kv, "report_base", c.report_base);
  read_double(kv, "report_base_sd", c.report_base_sd);
  read_double(kv, "b_r0", c.b_r0);
  read_array(kv, "b_r_coef", c.b_r_coef);
  read_double(kv, "noise_r", c.noise_r);
  read_double(kv, "tau_r", c.tau_r);
  read_array(kv, "tau_r_coef", c.tau_r_coef);
  read_double(kv, "tau_r_kd", c.tau_r_kd);
  read_double(kv, "participation_base", c.participation_base);
  read_double(kv, "participation_base_sd", c.participation_base_sd);
  read_double(kv, "b_p0", c.b_p0);
  read_array(kv, "b_p_coef", c.b_p_coef);
  read_double(kv, "noise_p", c.noise_p);
  read_double(kv, "tau_p", c.tau_p);
  read_array(kv, "tau_p_coef", c.tau_p_coef);
  read_double(kv, "tau_p_kd", c.tau_p_kd);
  read_array(kv, "offense_weights", c.offense_weights);
  read_array(kv, "lag_weights", c.lag_weights);
  read_double(kv, "kd_center", c.kd_center);
  read_double(kv, "kd_scale", c.kd_scale);
  if (auto unused = kv.unused_keys(); !unused.empty())
    throw std::invalid_argument("unknown simulation config key '" + unused.front() + "'");
  c.validate();
  return c;
}

void write_sim_config(std::ostream& out, const SimConfig& c) {
  out << "n_players = " << c.n_players << '\n'
      << "seed = " << c.seed << '\n'
      << "start = " << format_day(c.range.start) << '\n'
      << "end = " << format_day(c.range.end) << '\n'
      << "voice_start = " << format_day(c.voice_start) << '\n'
      << "target_setup = " << to_string(c.target_setup) << '\n';
  write_array(out, "cov_mean", c.cov_mean);
  write_array(out, "cov_sd", c.cov_sd);
  write_array(out, "skill_loading", c.skill_loading);
  out << "day_noise = " << csv::format_double(c.day_noise) << '\n'
      << "match_rate = " << csv::format_double(c.match_rate) << '\n'
      << "assign_intercept = " << (c.assign_intercept_auto ? std::string("auto") : csv::format_double(c.assign_intercept))
      << '\n';
  write_array(out, "assign_coef", c.assign_coef);
  out << "report_base = " << csv::format_double(c.report_base) << '\n'
      << "report_base_sd = " << csv::format_double(c.report_base_sd) << '\n'
      << "b_r0 = " << csv::format_double(c.b_r0) << '\n';
  write_array(out, "b_r_coef", c.b_r_coef);
  out << "noise_r = " << csv::format_double(c.noise_r) << '\n' << "tau_r = " << csv::format_double(c.tau_r) << '\n';
  write_array(out, "tau_r_coef", c.tau_r_coef);
  out << "tau_r_kd = " << csv::format_double(c.tau_r_kd) << '\n'
      << "participation_base = " << csv::format_double(c.participation_base) << '\n'
      << "participation_base_sd = " << csv::format_double(c.participation_base_sd) << '\n'
      << "b_p0 = " << csv::format_double(c.b_p0) << '\n';
  write_array(out, "b_p_coef", c.b_p_coef);
  out << "noise_p = " << csv::format_double(c.noise_p) << '\n' << "tau_p = " << csv::format_double(c.tau_p) << '\n';
  write_array(out, "tau_p_coef", c.tau_p_coef);
  out << "tau_p_kd = " << csv::format_double(c.tau_p_kd) << '\n';
  write_array(out, "offense_weights", c.offense_weights);
  write_array(out, "lag_weights", c.lag_weights);
  out << "kd_center = " << csv::format_double(c.kd_center) << '\n'
      << "kd_scale = " << csv::format_double(c.kd_scale) << '\n';
}

// ---------------------------------------------------------------------------------------
// Truth

const PlayerTruth& SimGroundTruth::at(const PlayerId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("player " + id + " is not part of this simulated world");
  return players[it->second];
}

void SimGroundTruth::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < players.size(); ++i) index_.emplace(players[i].player_id, i);
}

std::pair<double, Vector> true_effects(const SimGroundTruth& truth, const CohortTable& cohort,
                                       const std::vector<std::size_t>& rows, Outcome outcome) {
  Vector cate(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& p = truth.at(cohort.rows.at(rows[i]).player_id);
    cate[static_cast<Eigen::Index>(i)] = outcome == Outcome::ReportRate ? p.tau_report_rate : p.tau_participation;
  }
  if (rows.empty()) throw std::invalid_argument("true_effects: no rows");
  return {cate.mean(), cate};
}

std::pair<double, Vector> true_effects(const SimGroundTruth& truth, const CohortTable& cohort,
                                       const EstimationData& data, Outcome outcome) {
  return true_effects(truth, cohort, data.rows, outcome);
}

void write_truth_csv(std::ostream& out, const SimGroundTruth& truth) {
  out << "player_id,lag,treated,propensity,tau_report_rate,tau_participation\n";
  for (const auto& p : truth.players)
    out << p.player_id << ',' << p.lag << ',' << p.treated << ',' << csv::format_double(p.propensity) << ','
        << csv::format_double(p.tau_report_rate) << ',' << csv::format_double(p.tau_participation) << '\n';
}

// ---------------------------------------------------------------------------------------
// Generation

namespace {

constexpr int kBlockSize = 256;

struct PlayerSim {
  std::vector<ReportEvent> reports;
  std::vector<MatchDayRecord> days;
  ModerationEvent moderation;
  PlayerTruth truth;
};

/// floor(v) + Bernoulli(frac(v)): unbiased integer rounding.
long stochastic_round(double v, std::mt19937_64& rng) {
  if (v <= 0.0) return 0;
  const double f = std::floor(v);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return static_cast<long>(f) + (u(rng) < v - f ? 1 : 0);
}

template <typename Weights>
std::size_t draw_index(const Weights& w, std::size_t first, std::size_t last, std::mt19937_64& rng) {
  double total = 0.0;
  for (std::size_t i = first; i < last; ++i) total += w[i];
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  for (std::size_t i = first; i < last; ++i) {
    if (x < w[i]) return i;
    x -= w[i];
  }
  // Rounding fallthrough: last index with positive weight.
  for (std::size_t i = last; i-- > first;)
    if (w[i] > 0.0) return i;
  return first;
}

std::string player_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%07d", i);
  return buf;
}

OffenseType background_offense(OffenseType o) {
  return o == OT::Cheating ? OT::OffensiveTextChat : OT::Cheating;
}

class PlayerGenerator {
 public:
  PlayerGenerator(const SimConfig& c, std::mt19937_64& rng) : c_(c), rng_(rng) {}

  PlayerSim generate(int index) {
    PlayerSim out;
    const PlayerId id = player_name(index);
    const auto offense = static_cast<OffenseType>(draw_index(c_.offense_weights, 0, 4, rng_));

    // Latent per-match means.
    const double skill = normal_(rng_);
    CovariateVector latent{};
    for (std::size_t j = 0; j < kNumCovariates; ++j) {
      const double rho = c_.skill_loading[j];
      const double v = c_.cov_mean[j] + c_.cov_sd[j] * (rho * skill + std::sqrt(1.0 - rho * rho) * normal_(rng_));
      latent[j] = std::max(v, 0.05 * c_.cov_mean[j]);
    }
    latent[static_cast<std::size_t>(Covariate::Accuracy)] =
        std::min(latent[static_cast<std::size_t>(Covariate::Accuracy)], 95.0);
    const double p0 = std::clamp(c_.participation_base + c_.participation_base_sd * normal_(rng_), 0.2, 0.95);
    const double r0 = std::max(0.2, c_.report_base + c_.report_base_sd * normal_(rng_));

    // Pre-report week, at day offsets -7..-1 relative to T.
    std::vector<DayDraw> pre = draw_days(7, p0, latent);
    CovariateVector x{};
    double m0 = 0.0;
    int active0 = 0;
    for (const auto& d : pre) {
      if (d.matches == 0) continue;
      ++active0;
      m0 += d.matches;
      for (std::size_t j = 0; j < kNumCovariates; ++j) x[j] += d.matches * d.stats[j];
    }
    const bool have_x = m0 > 0.0;
    if (have_x)
      for (auto& v : x) v /= m0;
    const CovariateVector& xs = have_x ? x : latent;

    CovariateVector z{};
    for (std::size_t j = 0; j < kNumCovariates; ++j) z[j] = (xs[j] - c_.cov_mean[j]) / c_.cov_sd[j];
    const double kd = xs[static_cast<std::size_t>(Covariate::Eliminations)] /
                      std::max(xs[static_cast<std::size_t>(Covariate::Deaths)], 1e-9);
    const double kd_z = (kd - c_.kd_center) / c_.kd_scale;
    auto lin = [&](const CovariateVector& coef) {
      double s = 0.0;
      for (std::size_t j = 0; j < kNumCovariates; ++j) s += coef[j] * z[j];
      return s;
    };

    // Assignment.
    const double intercept = c_.assign_intercept_auto
                                 ? std::log(c_.quick_lag_mass() / (1.0 - c_.quick_lag_mass()))
                                 : c_.assign_intercept;
    const double pi = sigmoid(intercept + lin(c_.assign_coef));
    const bool quick = unif_(rng_) < pi;
    const int lag = quick ? static_cast<int>(draw_index(c_.lag_weights, 0, 4, rng_))
                          : static_cast<int>(draw_index(c_.lag_weights, 4, kNumLags, rng_));
    const auto setup = StudySetup::from_kind(c_.target_setup);
    const int treated = lag <= setup.treat_max_lag ? 1 : 0;

    // Report date: all windows inside the study range; voice reports after voice start.
    Day earliest = c_.range.start + 7;
    if (offense == OT::OffensiveVoiceChat) earliest = std::max(earliest, c_.voice_start);
    const Day latest = c_.range.end - (lag + 6);
    if (latest < earliest)
      throw std::invalid_argument("sim: study range too short for the observation windows of " +
                                  std::string(to_string(offense)) + " cases");
    const int span = days_between(earliest, latest);
    const Day t = earliest + std::uniform_int_distribution<int>(0, span)(rng_);
    const Day m = t + lag;

    // Outcome model.
    const double tau_r = c_.tau_r + lin(c_.tau_r_coef) + c_.tau_r_kd * kd_z;
    const double tau_p = c_.tau_p + lin(c_.tau_p_coef) + c_.tau_p_kd * kd_z;
    const double b_r = c_.b_r0 + lin(c_.b_r_coef);
    const double b_p = c_.b_p0 + lin(c_.b_p_coef);

    const Day anchor = setup.post_anchor == PostAnchor::ReportDate ? t : m;
    const Day last_day = m + 6;
    const int post_days = days_between(t, last_day) + 1;

    const double rate0 = m0 > 0.0 ? static_cast<double>(stochastic_round(r0 * m0, rng_)) / m0 : 0.0;
    const long k0 = m0 > 0.0 ? std::lround(rate0 * m0) : 0;
    const double part0 = active0 / 7.0;
    const double p1 = std::clamp(part0 + b_p + treated * tau_p + c_.noise_p * normal_(rng_), 0.0, 1.0);
    const double rate1 = std::max(0.0, rate0 + b_r + treated * tau_r + c_.noise_r * normal_(rng_));

    // Days from T to M+6: the outcome week follows p1, everything else p0.
    const int w1_first = days_between(t, anchor);
    std::vector<DayDraw> post;
    post.reserve(static_cast<std::size_t>(post_days));
    for (int k = 0; k < post_days; ++k) {
      const bool in_w1 = k >= w1_first && k < w1_first + 7;
      post.push_back(draw_day(in_w1 ? p1 : p0, latent));
    }

    // Report events.
    const OffenseType bg = background_offense(offense);
    auto emit_report = [&](Day d, OffenseType o) {
      out.reports.push_back({id, d, o, "r" + std::to_string(reporter_++)});
    };
    spread_reports(pre, k0, t - 7, bg, emit_report);
    // Outcome week.
    {
      std::vector<DayDraw> w1(post.begin() + w1_first, post.begin() + w1_first + 7);
      double m1 = 0.0;
      for (const auto& d : w1) m1 += d.matches;
      long k1 = stochastic_round(rate1 * m1, rng_);
      if (anchor == t) {
        // The linking report is one of the outcome-week reports.
        emit_report(t, offense);
        k1 = std::max<long>(k1 - 1, 0);
      }
      spread_reports(w1, k1, anchor, bg, emit_report);
    }
    if (anchor != t) emit_report(t, offense);
    // Days outside both windows carry background reports at the baseline rate.
    for (int k = 0; k < post_days; ++k) {
      if (k >= w1_first && k < w1_first + 7) continue;
      if (post[k].matches == 0) continue;
      const long kk = stochastic_round(r0 * post[k].matches, rng_);
      for (long q = 0; q < kk; ++q) emit_report(t + k, bg);
    }

    // Match-day records, every day from T-7 to M+6.
    for (int k = 0; k < 7; ++k) out.days.push_back(to_record(id, t - 7 + k, pre[k]));
    for (int k = 0; k < post_days; ++k) out.days.push_back(to_record(id, t + k, post[k]));
    std::sort(out.reports.begin(), out.reports.end(), [](const ReportEvent& a, const ReportEvent& b) {
      return a.report_date < b.report_date;
    });

    // Moderation.
    out.moderation.player_id = id;
    out.moderation.moderation_date = m;
    out.moderation.offense_type = offense;
    out.moderation.actions = draw_actions(offense);
    for (const auto& r : out.reports)
      if (r.report_date == t && r.offense_type == offense) out.moderation.linked_reporters.push_back(*r.reporter_id);

    out.truth = PlayerTruth{id, lag, treated, pi, tau_r, tau_p};
    return out;
  }

 private:
  struct DayDraw {
    std::uint32_t matches = 0;
    CovariateVector stats{};
  };

  DayDraw draw_day(double p_active, const CovariateVector& latent) {
    DayDraw d;
    if (unif_(rng_) >= p_active) return d;
    d.matches = 1 + static_cast<std::uint32_t>(std::poisson_distribution<int>(c_.match_rate)(rng_));
    for (std::size_t j = 0; j < kNumCovariates; ++j)
      d.stats[j] = latent[j] * std::exp(c_.day_noise * normal_(rng_) - 0.5 * c_.day_noise * c_.day_noise);
    auto& acc = d.stats[static_cast<std::size_t>(Covariate::Accuracy)];
    acc = std::min(acc, 100.0);
    return d;
  }

  std::vector<DayDraw> draw_days(int n, double p_active, const CovariateVector& latent) {
    std::vector<DayDraw> v;
    for (int k = 0; k < n; ++k) v.push_back(draw_day(p_active, latent));
    return v;
  }

  /// Places `count` reports on active days, each match equally likely.
  template <typename Emit>
  void spread_reports(const std::vector<DayDraw>& days, long count, Day first, OffenseType o, Emit&& emit) {
    std::vector<double> w;
    for (const auto& d : days) w.push_back(d.matches);
    if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) return;
    for (long q = 0; q < count; ++q) emit(first + static_cast<int>(draw_index(w, 0, w.size(), rng_)), o);
  }

  ActionMultiset draw_actions(OffenseType o) {
    const auto& table = observed_action_frequencies();
    std::vector<double> w;
    for (const auto& row : table) w.push_back(row.offense == o ? row.ratio : 0.0);
    return table[draw_index(w, 0, w.size(), rng_)].actions;
  }

  static MatchDayRecord to_record(const PlayerId& id, Day date, const DayDraw& d) {
    MatchDayRecord r;
    r.player_id = id;
    r.date = date;
    r.matches_played = d.matches;
    if (d.matches > 0) r.stats = d.stats;
    return r;
  }

  const SimConfig& c_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  long reporter_ = 0;
};

}  // namespace

SimWorld generate_world(const SimConfig& config) {
  config.validate();
  SimWorld world;
  world.truth.target_setup = config.target_setup;
  const int blocks = (config.n_players + kBlockSize - 1) / kBlockSize;
  for (int b = 0; b < blocks; ++b) {
    std::mt19937_64 rng(derive_seed(config.seed, 0x5157, static_cast<std::uint64_t>(b)));
    PlayerGenerator gen(config, rng);
    const int last = std::min(config.n_players, (b + 1) * kBlockSize);
    for (int i = b * kBlockSize; i < last; ++i) {
      auto p = gen.generate(i);
      for (auto& r : p.reports) {
        r.reporter_id = "b" + std::to_string(b) + *r.reporter_id;
        world.tables.reports.push_back(std::move(r));
      }
      for (auto& id : p.moderation.linked_reporters) id = "b" + std::to_string(b) + id;
      world.tables.moderations.push_back(std::move(p.moderation));
      for (auto& d : p.days) world.tables.match_days.push_back(std::move(d));
      world.truth.players.push_back(std::move(p.truth));
    }
  }
  double sr = 0.0, sp = 0.0;
  for (const auto& p : world.truth.players) {
    sr += p.tau_report_rate;
    sp += p.tau_participation;
  }
  world.truth.true_ate_report_rate = sr / config.n_players;
  world.truth.true_ate_participation = sp / config.n_players;
  world.truth.reindex();
  return world;
}

}  // namespace modcausal
