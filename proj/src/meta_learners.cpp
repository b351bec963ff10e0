#include "modcausal/meta_learners.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace modcausal {

std::string_view to_string(Outcome o) { return o == Outcome::ReportRate ? "delta_report_rate" : "delta_participation"; }

Outcome parse_outcome(std::string_view s) {
  if (s == "delta_report_rate" || s == "report_rate" || s == "R") return Outcome::ReportRate;
  if (s == "delta_participation" || s == "participation" || s == "P") return Outcome::Participation;
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::T: return "T";
    case EstimatorKind::S: return "S";
    case EstimatorKind::X: return "X";
    case EstimatorKind::R: return "R";
    case EstimatorKind::DR: return "DR";
  }
  return "?";
}

EstimatorKind parse_estimator(std::string_view s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u.ends_with("-LEARNER")) u.resize(u.size() - 8);
  if (u == "T") return EstimatorKind::T;
  if (u == "S") return EstimatorKind::S;
  if (u == "X") return EstimatorKind::X;
  if (u == "R") return EstimatorKind::R;
  if (u == "DR") return EstimatorKind::DR;
  throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

// ---------------------------------------------------------------------------------------

long EstimationData::n_treated() const { return static_cast<long>(w.sum()); }
long EstimationData::n_control() const { return static_cast<long>(w.size()) - n_treated(); }

EstimationData EstimationData::subset(const std::vector<Eigen::Index>& idx) const {
  EstimationData out;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.x.resize(n, x.cols());
  out.w.resize(n);
  out.y.resize(n);
  out.baseline.resize(n);
  out.rows.resize(idx.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = idx[i];
    out.x.row(i) = x.row(j);
    out.w[i] = w[j];
    out.y[i] = y[j];
    out.baseline[i] = baseline[j];
    out.rows[i] = rows[j];
  }
  return out;
}

EstimationData make_estimation_data(const CohortTable& cohort, Outcome outcome) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cohort.rows.size(); ++i) {
    const auto& r = cohort.rows[i];
    if (outcome == Outcome::ReportRate && (!r.delta_report_rate || !r.baseline_report_rate)) continue;
    keep.push_back(i);
  }
  EstimationData d;
  const auto n = static_cast<Eigen::Index>(keep.size());
  d.x.resize(n, static_cast<Eigen::Index>(kNumCovariates));
  d.w.resize(n);
  d.y.resize(n);
  d.baseline.resize(n);
  d.rows = keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = cohort.rows[keep[i]];
    for (std::size_t k = 0; k < kNumCovariates; ++k) d.x(i, static_cast<Eigen::Index>(k)) = r.covariates[k];
    d.w[i] = r.treated;
    if (outcome == Outcome::ReportRate) {
      d.y[i] = *r.delta_report_rate;
      d.baseline[i] = *r.baseline_report_rate;
    } else {
      d.y[i] = r.delta_participation;
      d.baseline[i] = r.baseline_participation;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------------------
// Propensity

namespace {

Vector clip_scores(Vector s, ClipBounds clip) {
  if (!(clip.lo > 0.0 && clip.lo < clip.hi && clip.hi < 1.0))
    throw std::invalid_argument("propensity clip bounds must satisfy 0 < lo < hi < 1");
  return s.unaryExpr([&](double v) { return std::clamp(v, clip.lo, clip.hi); });
}

void require_both_arms(const EstimationData& d, const char* who) {
  const long nt = d.n_treated();
  if (nt == 0 || nt == static_cast<long>(d.size()))
    throw std::invalid_argument(std::string(who) + ": both treatment arms must be non-empty");
}

}  // namespace

PropensityModel estimate_propensity(const EstimationData& data, ClipBounds clip, const LogisticParams& params,
                                    const Vector* warm_start) {
  require_both_arms(data, "estimate_propensity");
  auto clf = std::make_shared<LogisticClassifier>(params);
  if (warm_start) clf->set_warm_start(*warm_start);
  clf->fit(data.x, data.w);
  PropensityModel m{clf, clip, clip_scores(clf->predict_proba(data.x), clip)};
  return m;
}

PropensityModel estimate_propensity(const CohortTable& cohort, ClipBounds clip) {
  return estimate_propensity(make_estimation_data(cohort, Outcome::Participation), clip);
}

PropensityModel propensity_from_scores(Vector scores, ClipBounds clip) {
  return PropensityModel{nullptr, clip, clip_scores(std::move(scores), clip)};
}

PropensityModel fit_propensity(const EstimationData& data, const EstimatorConfig& cfg, const Vector* warm_start) {
  if (cfg.propensity_mode == PropensityMode::Constant)
    return propensity_from_scores(Vector::Constant(data.size(), 0.5), cfg.clip);
  return estimate_propensity(data, cfg.clip, cfg.propensity, warm_start);
}

// ---------------------------------------------------------------------------------------
// Helpers

namespace {

struct ArmSplit {
  Matrix x1, x0;
  Vector y1, y0;
};

ArmSplit split_arms(const EstimationData& d) {
  const long nt = d.n_treated();
  const long nc = d.n_control();
  ArmSplit s;
  s.x1.resize(nt, d.x.cols());
  s.x0.resize(nc, d.x.cols());
  s.y1.resize(nt);
  s.y0.resize(nc);
  Eigen::Index a = 0, b = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.w[i] == 1.0) {
      s.x1.row(a) = d.x.row(i);
      s.y1[a++] = d.y[i];
    } else {
      s.x0.row(b) = d.x.row(i);
      s.y0[b++] = d.y[i];
    }
  }
  return s;
}

constexpr long kMinArmRows = 2;

void require_fit_sizes(const EstimationData& d, const char* who) {
  if (d.n_treated() < kMinArmRows || d.n_control() < kMinArmRows)
    throw std::invalid_argument(std::string(who) + ": each arm needs at least " + std::to_string(kMinArmRows) +
                                " rows");
}

EffectEstimate make_estimate(std::string name, const EstimationData& d, Vector cate) {
  EffectEstimate e;
  e.estimator = std::move(name);
  e.ate = cate.size() ? cate.mean() : 0.0;
  e.cate = std::move(cate);
  e.n_treated = d.n_treated();
  e.n_control = d.n_control();
  e.ci_low = e.ci_high = e.ate;
  return e;
}

void require_scores(const PropensityModel& ps, const EstimationData& d, const char* who) {
  if (ps.scores.size() != d.size())
    throw std::invalid_argument(std::string(who) + ": propensity scores do not match the data");
}

Matrix with_treatment_column(const Matrix& x, double value) {
  Matrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setConstant(value);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Meta-learners

EffectEstimate t_learner(const EstimationData& d, const EstimatorConfig& cfg) {
  require_fit_sizes(d, "t_learner");
  const auto arms = split_arms(d);
  auto mu1 = make_regressor(cfg.base, derive_seed(cfg.seed, 11));
  auto mu0 = make_regressor(cfg.base, derive_seed(cfg.seed, 10));
  mu1->fit(arms.x1, arms.y1);
  mu0->fit(arms.x0, arms.y0);
  return make_estimate("T", d, mu1->predict(d.x) - mu0->predict(d.x));
}

EffectEstimate s_learner(const EstimationData& d, const EstimatorConfig& cfg) {
  require_fit_sizes(d, "s_learner");
  Matrix xw(d.size(), d.x.cols() + 1);
  xw.leftCols(d.x.cols()) = d.x;
  xw.col(d.x.cols()) = d.w;
  auto f = make_regressor(cfg.base, derive_seed(cfg.seed, 20));
  f->fit(xw, d.y);
  return make_estimate("S", d, f->predict(with_treatment_column(d.x, 1.0)) - f->predict(with_treatment_column(d.x, 0.0)));
}

EffectEstimate x_learner(const EstimationData& d, const EstimatorConfig& cfg, const PropensityModel& ps,
                         bool use_propensity_weighting) {
  require_fit_sizes(d, "x_learner");
  if (use_propensity_weighting) require_scores(ps, d, "x_learner");
  const auto arms = split_arms(d);
  auto mu1 = make_regressor(cfg.base, derive_seed(cfg.seed, 31));
  auto mu0 = make_regressor(cfg.base, derive_seed(cfg.seed, 30));
  mu1->fit(arms.x1, arms.y1);
  mu0->fit(arms.x0, arms.y0);
  // Imputed individual effects in each arm.
  const Vector d1 = arms.y1 - mu0->predict(arms.x1);
  const Vector d0 = mu1->predict(arms.x0) - arms.y0;
  auto tau1 = make_regressor(cfg.effect, derive_seed(cfg.seed, 33));
  auto tau0 = make_regressor(cfg.effect, derive_seed(cfg.seed, 32));
  tau1->fit(arms.x1, d1);
  tau0->fit(arms.x0, d0);
  const Vector t1 = tau1->predict(d.x);
  const Vector t0 = tau0->predict(d.x);
  const Vector g = use_propensity_weighting
                       ? ps.scores
                       : Vector::Constant(d.size(), static_cast<double>(d.n_treated()) / d.size());
  Vector cate = g.cwiseProduct(t0) + (Vector::Ones(d.size()) - g).cwiseProduct(t1);
  return make_estimate(use_propensity_weighting ? "X" : "X-unweighted", d, std::move(cate));
}

EffectEstimate r_learner(const EstimationData& d, const EstimatorConfig& cfg, const PropensityModel& ps) {
  require_fit_sizes(d, "r_learner");
  require_scores(ps, d, "r_learner");
  auto m = make_regressor(cfg.base, derive_seed(cfg.seed, 40));
  m->fit(d.x, d.y);
  const Vector y_res = d.y - m->predict(d.x);
  const Vector w_res = d.w - ps.scores;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (std::abs(w_res[i]) >= 1e-6) keep.push_back(i);
  if (keep.size() < 2) throw std::invalid_argument("r_learner: too few rows with non-zero treatment residual");
  const auto k = static_cast<Eigen::Index>(keep.size());
  Matrix xk(k, d.x.cols());
  Vector pseudo(k), weight(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = keep[i];
    xk.row(i) = d.x.row(j);
    pseudo[i] = y_res[j] / w_res[j];
    weight[i] = w_res[j] * w_res[j];
  }
  auto tau = make_regressor(cfg.effect, derive_seed(cfg.seed, 41));
  tau->fit(xk, pseudo, weight);
  auto est = make_estimate("R", d, tau->predict(d.x));
  est.dropped_rows = static_cast<long>(d.size()) - k;
  return est;
}

double dr_ate_formula(const Vector& w, const Vector& y, const Vector& e, const Vector& mu1, const Vector& mu0) {
  const auto n = w.size();
  if (y.size() != n || e.size() != n || mu1.size() != n || mu0.size() != n || n == 0)
    throw std::invalid_argument("dr_ate_formula: size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0)) throw std::invalid_argument("dr_ate_formula: propensity must be clipped inside (0,1)");
    total += (w[i] * y[i] - (w[i] - e[i]) * mu1[i]) / e[i] -
             ((1.0 - w[i]) * y[i] + (w[i] - e[i]) * mu0[i]) / (1.0 - e[i]);
  }
  return total / static_cast<double>(n);
}

Vector dr_pseudo_outcomes(const Vector& w, const Vector& y, const Vector& e, const Vector& mu1, const Vector& mu0) {
  const auto n = w.size();
  if (y.size() != n || e.size() != n || mu1.size() != n || mu0.size() != n)
    throw std::invalid_argument("dr_pseudo_outcomes: size mismatch");
  Vector phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0))
      throw std::invalid_argument("dr_pseudo_outcomes: propensity must be clipped inside (0,1)");
    phi[i] = mu1[i] - mu0[i] + w[i] * (y[i] - mu1[i]) / e[i] - (1.0 - w[i]) * (y[i] - mu0[i]) / (1.0 - e[i]);
  }
  return phi;
}

namespace {

struct OutcomeNuisance {
  Vector mu1, mu0;
};

OutcomeNuisance fit_outcome_models(const EstimationData& d, const EstimatorConfig& cfg) {
  OutcomeNuisance out{Vector(d.size()), Vector(d.size())};
  if (!cfg.dr_cross_fit) {
    const auto arms = split_arms(d);
    auto mu1 = make_regressor(cfg.base, derive_seed(cfg.seed, 51));
    auto mu0 = make_regressor(cfg.base, derive_seed(cfg.seed, 50));
    mu1->fit(arms.x1, arms.y1);
    mu0->fit(arms.x0, arms.y0);
    out.mu1 = mu1->predict(d.x);
    out.mu0 = mu0->predict(d.x);
    return out;
  }
  // Two folds, stratified by arm: nuisances for each fold come from the other fold.
  std::vector<int> fold(static_cast<std::size_t>(d.size()));
  std::mt19937_64 rng(derive_seed(cfg.seed, 52));
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (d.w[i] == arm) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % 2);
  }
  for (int f = 0; f < 2; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < d.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    const auto tr = d.subset(train);
    require_fit_sizes(tr, "dr_learner cross-fit");
    const auto arms = split_arms(tr);
    auto mu1 = make_regressor(cfg.base, derive_seed(cfg.seed, 53, f));
    auto mu0 = make_regressor(cfg.base, derive_seed(cfg.seed, 54, f));
    mu1->fit(arms.x1, arms.y1);
    mu0->fit(arms.x0, arms.y0);
    Matrix xt(static_cast<Eigen::Index>(test.size()), d.x.cols());
    for (std::size_t k = 0; k < test.size(); ++k) xt.row(static_cast<Eigen::Index>(k)) = d.x.row(test[k]);
    const Vector p1 = mu1->predict(xt), p0 = mu0->predict(xt);
    for (std::size_t k = 0; k < test.size(); ++k) {
      out.mu1[test[k]] = p1[static_cast<Eigen::Index>(k)];
      out.mu0[test[k]] = p0[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

}  // namespace

EffectEstimate dr_learner_ate(const EstimationData& d, const EstimatorConfig& cfg, const PropensityModel& ps) {
  require_fit_sizes(d, "dr_learner");
  require_scores(ps, d, "dr_learner");
  const auto nu = fit_outcome_models(d, cfg);
  auto est = make_estimate("DR", d, dr_pseudo_outcomes(d.w, d.y, ps.scores, nu.mu1, nu.mu0));
  est.ate = dr_ate_formula(d.w, d.y, ps.scores, nu.mu1, nu.mu0);
  est.ci_low = est.ci_high = est.ate;
  return est;
}

EffectEstimate dr_learner_cate(const EstimationData& d, const EstimatorConfig& cfg, const PropensityModel& ps) {
  require_fit_sizes(d, "dr_learner");
  require_scores(ps, d, "dr_learner");
  const auto nu = fit_outcome_models(d, cfg);
  const Vector phi = dr_pseudo_outcomes(d.w, d.y, ps.scores, nu.mu1, nu.mu0);
  auto tau = make_regressor(cfg.effect, derive_seed(cfg.seed, 55));
  tau->fit(d.x, phi);
  auto est = make_estimate("DR", d, tau->predict(d.x));
  est.ate = phi.mean();
  est.ci_low = est.ci_high = est.ate;
  return est;
}

EffectEstimate run_estimator(EstimatorKind kind, const EstimationData& data, const EstimatorConfig& cfg,
                             const PropensityModel& ps, bool ate_only) {
  switch (kind) {
    case EstimatorKind::T: return t_learner(data, cfg);
    case EstimatorKind::S: return s_learner(data, cfg);
    case EstimatorKind::X: return x_learner(data, cfg, ps, cfg.x_use_propensity);
    case EstimatorKind::R: return r_learner(data, cfg, ps);
    case EstimatorKind::DR: return ate_only ? dr_learner_ate(data, cfg, ps) : dr_learner_cate(data, cfg, ps);
  }
  throw std::invalid_argument("unknown estimator");
}

// ---------------------------------------------------------------------------------------
// Relative effects

double control_baseline_mean(const EstimationData& d) {
  double sum = 0.0;
  long n = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d.w[i] == 0.0) {
      sum += d.baseline[i];
      ++n;
    }
  if (n == 0) throw std::invalid_argument("control_baseline_mean: empty control arm");
  return sum / static_cast<double>(n);
}

double relative_effect(double value, double baseline_mean) {
  if (std::abs(baseline_mean) < 1e-9) throw std::domain_error("relative_effect: baseline mean is zero");
  return 100.0 * value / baseline_mean;
}

void apply_relative_effect(EffectEstimate& est, const EstimationData& data) {
  est.baseline_mean = control_baseline_mean(data);
  est.ate_relative = relative_effect(est.ate, est.baseline_mean);
  const double a = relative_effect(est.ci_low, est.baseline_mean);
  const double b = relative_effect(est.ci_high, est.baseline_mean);
  est.ci_low_relative = std::min(a, b);
  est.ci_high_relative = std::max(a, b);
}

// ---------------------------------------------------------------------------------------
// Bootstrap

double sorted_quantile(const std::vector<double>& v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(v.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BootstrapResult bootstrap_ci(const EstimationData& data, const std::vector<EstimatorKind>& kinds,
                             const std::vector<double>& point_estimates, const EstimatorConfig& cfg,
                             const BootstrapOptions& opts) {
  if (opts.reps < 100) throw std::invalid_argument("bootstrap_ci: reps must be >= 100");
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw std::invalid_argument("bootstrap_ci: level in (0,1)");
  if (kinds.size() != point_estimates.size()) throw std::invalid_argument("bootstrap_ci: one point estimate per estimator");
  require_both_arms(data, "bootstrap_ci");

  std::vector<Eigen::Index> treated, control;
  for (Eigen::Index i = 0; i < data.size(); ++i) (data.w[i] == 1.0 ? treated : control).push_back(i);

  // Warm start for the per-replicate propensity refits.
  std::optional<Vector> warm;
  if (cfg.propensity_mode == PropensityMode::Logistic) {
    auto full = estimate_propensity(data, cfg.clip, cfg.propensity);
    warm = static_cast<const LogisticClassifier&>(*full.classifier).theta();
  }

  const int reps = opts.reps;
  const int max_attempts = 10 * reps;
  BootstrapResult result;
  result.replicates.assign(kinds.size(), std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<int> failures(static_cast<std::size_t>(reps), 0);
  std::atomic<int> next{0};
  std::atomic<int> total_failures{0};
  std::mutex err_mu;
  std::string first_error;

  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) return;
      for (int attempt = 0;; ++attempt) {
        if (total_failures.load() >= max_attempts - reps) return;
        std::mt19937_64 rng(derive_seed(opts.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt)));
        std::vector<Eigen::Index> idx;
        idx.reserve(static_cast<std::size_t>(data.size()));
        std::uniform_int_distribution<std::size_t> pick_t(0, treated.size() - 1), pick_c(0, control.size() - 1);
        for (std::size_t k = 0; k < treated.size(); ++k) idx.push_back(treated[pick_t(rng)]);
        for (std::size_t k = 0; k < control.size(); ++k) idx.push_back(control[pick_c(rng)]);
        try {
          const auto sample = data.subset(idx);
          auto rep_cfg = cfg;
          rep_cfg.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r));
          const auto ps = fit_propensity(sample, rep_cfg, warm ? &*warm : nullptr);
          for (std::size_t k = 0; k < kinds.size(); ++k)
            result.replicates[k][static_cast<std::size_t>(r)] = run_estimator(kinds[k], sample, rep_cfg, ps, true).ate;
          break;
        } catch (const std::exception& e) {
          ++failures[static_cast<std::size_t>(r)];
          ++total_failures;
          std::lock_guard lock(err_mu);
          if (first_error.empty()) first_error = e.what();
        }
      }
    }
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (total_failures.load() >= max_attempts - reps)
    throw std::runtime_error("bootstrap_ci: too many failed replicates (" + first_error + ")");
  result.redraws = std::accumulate(failures.begin(), failures.end(), 0);

  const double alpha = 1.0 - opts.level;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    auto sorted = result.replicates[k];
    std::sort(sorted.begin(), sorted.end());
    BootstrapInterval iv{sorted_quantile(sorted, alpha / 2.0), sorted_quantile(sorted, 1.0 - alpha / 2.0), false};
    const double pe = point_estimates[k];
    if (pe < iv.low || pe > iv.high) {
      iv.low = std::min(iv.low, pe);
      iv.high = std::max(iv.high, pe);
      iv.widened = true;
    }
    result.intervals.push_back(iv);
  }
  return result;
}

BootstrapInterval bootstrap_ci(const EstimationData& data, EstimatorKind kind, double point_estimate,
                               const EstimatorConfig& cfg, const BootstrapOptions& opts) {
  return bootstrap_ci(data, std::vector{kind}, std::vector{point_estimate}, cfg, opts).intervals.front();
}

EffectEstimate estimate_with_ci(EstimatorKind kind, const EstimationData& data, const EstimatorConfig& cfg,
                                const BootstrapOptions& opts) {
  const auto ps = fit_propensity(data, cfg);
  auto est = run_estimator(kind, data, cfg, ps);
  const auto iv = bootstrap_ci(data, kind, est.ate, cfg, opts);
  est.ci_low = iv.low;
  est.ci_high = iv.high;
  est.bootstrap_reps = opts.reps;
  apply_relative_effect(est, data);
  return est;
}

// ---------------------------------------------------------------------------------------
// CATE distribution summaries

CateSummary summarize_cate(const std::string& name, const Vector& cate) {
  if (cate.size() == 0) throw std::invalid_argument("summarize_cate: empty vector");
  CateSummary s;
  s.estimator = name;
  const auto n = static_cast<double>(cate.size());
  s.mean = cate.mean();
  s.sd = cate.size() > 1 ? std::sqrt((cate.array() - s.mean).square().sum() / (n - 1.0)) : 0.0;
  std::vector<double> v(cate.data(), cate.data() + cate.size());
  std::sort(v.begin(), v.end());
  s.q25 = sorted_quantile(v, 0.25);
  s.q75 = sorted_quantile(v, 0.75);
  s.iqr = s.q75 - s.q25;

  double spread = std::min(s.sd, s.iqr / 1.34);
  if (spread <= 0.0) spread = s.sd;
  if (spread <= 0.0) {
    s.mode = s.mean;
    return s;
  }
  const double h = 0.9 * spread * std::pow(n, -0.2);
  constexpr int kGrid = 512;
  const double lo = v.front() - 3.0 * h, hi = v.back() + 3.0 * h;
  double best = -1.0;
  for (int g = 0; g < kGrid; ++g) {
    const double t = lo + (hi - lo) * g / (kGrid - 1);
    double dens = 0.0;
    // Only points within 6 bandwidths contribute materially.
    auto first = std::lower_bound(v.begin(), v.end(), t - 6.0 * h);
    auto last = std::upper_bound(v.begin(), v.end(), t + 6.0 * h);
    for (auto it = first; it != last; ++it) {
      const double u = (t - *it) / h;
      dens += std::exp(-0.5 * u * u);
    }
    if (dens > best) {
      best = dens;
      s.mode = t;
    }
  }
  return s;
}

std::vector<CateSummary> compare_meta_learners(const EstimationData& data, const EstimatorConfig& cfg) {
  const auto ps = fit_propensity(data, cfg);
  std::vector<CateSummary> out;
  for (auto k : kAllEstimators) {
    const auto est = run_estimator(k, data, cfg, ps);
    out.push_back(summarize_cate(std::string(to_string(k)), est.cate));
  }
  return out;
}

}  // namespace modcausal
