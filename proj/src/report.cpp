#include "modcausal/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "csv.hpp"

namespace modcausal {

LearnerSpec PipelineOptions::effect_for(SetupKind s) const {
  if (effect) return *effect;
  return s == SetupKind::ModerationVsNone ? LearnerSpec::gbt_default() : LearnerSpec::linear();
}

namespace {

std::string learner_name(const LearnerSpec& s) { return std::string(to_string(s.kind)); }

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::string(f(v[i]));
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> PipelineOptions::echo() const {
  std::vector<std::pair<std::string, std::string>> e = {
      {"seed", std::to_string(seed)},
      {"from", format_day(range.start)},
      {"to", format_day(range.end)},
      {"voice_from", format_day(voice_start)},
      {"setups", join(setups, [](SetupKind k) { return to_string(k); })},
      {"outcomes", join(outcomes, [](Outcome o) { return to_string(o); })},
      {"estimators", join(estimators, [](EstimatorKind k) { return to_string(k); })},
      {"base", learner_name(base)},
      {"effect_learner", effect ? learner_name(*effect) : std::string("auto")},
      {"clip", csv::format_double(clip.lo) + "," + csv::format_double(clip.hi)},
      {"dr_cross_fit", dr_cross_fit ? "true" : "false"},
      {"reps", std::to_string(reps)},
      {"level", csv::format_double(level)},
      {"match_k", std::to_string(match_k)},
      {"min_arm_size", std::to_string(min_arm_size)},
  };
  e.insert(e.end(), extra_echo.begin(), extra_echo.end());
  return e;
}

bool AnalysisReport::all_degenerate() const {
  for (const auto& s : strata)
    for (const auto& o : s.outcomes)
      if (!o.degenerate && !o.estimates.empty()) return false;
  return true;
}

PipelineError::PipelineError(std::string st, std::string stratum_label, const std::string& what)
    : std::runtime_error(st + " [" + stratum_label + "]: " + what), stage(std::move(st)), stratum(std::move(stratum_label)) {}

std::vector<Stratum> report_strata() {
  std::vector<Stratum> out;
  for (auto o : {OffenseType::Cheating, OffenseType::OffensiveTextChat, OffenseType::OffensiveUserID,
                 OffenseType::OffensiveVoiceChat}) {
    out.push_back({o, std::nullopt});
    if (o == OffenseType::Cheating) continue;
    out.push_back({o, Severity::Milder});
    out.push_back({o, Severity::Stricter});
  }
  return out;
}

namespace {

OutcomeResult analyse_outcome(const CohortTable& cohort, Outcome outcome, const PipelineOptions& opts,
                              std::uint64_t stream, const std::string& label) {
  OutcomeResult res;
  res.outcome = outcome;
  const auto data = make_estimation_data(cohort, outcome);
  if (data.n_treated() < opts.min_arm_size || data.n_control() < opts.min_arm_size) {
    res.degenerate = "arm below " + std::to_string(opts.min_arm_size) + " rows (treated " +
                     std::to_string(data.n_treated()) + ", control " + std::to_string(data.n_control()) + ")";
    return res;
  }
  double baseline = 0.0;
  try {
    baseline = control_baseline_mean(data);
    relative_effect(1.0, baseline);
  } catch (const std::exception&) {
    res.degenerate = "control baseline mean is zero";
    return res;
  }

  EstimatorConfig cfg;
  cfg.base = opts.base;
  cfg.effect = opts.effect_for(cohort.setup.kind);
  cfg.clip = opts.clip;
  cfg.dr_cross_fit = opts.dr_cross_fit;
  cfg.seed = derive_seed(opts.seed, stream, 1);

  PropensityModel ps;
  try {
    ps = fit_propensity(data, cfg);
  } catch (const std::exception& e) {
    throw PipelineError("propensity", label, e.what());
  }

  std::vector<double> points;
  for (auto k : opts.estimators) {
    try {
      auto est = run_estimator(k, data, cfg, ps);
      points.push_back(est.ate);
      res.estimates.push_back(std::move(est));
    } catch (const std::exception& e) {
      throw PipelineError(std::string("estimate ") + std::string(to_string(k)), label, e.what());
    }
  }

  BootstrapOptions bo;
  bo.reps = opts.reps;
  bo.level = opts.level;
  bo.seed = derive_seed(opts.seed, stream, 2);
  bo.threads = opts.threads;
  BootstrapResult boot;
  try {
    boot = bootstrap_ci(data, opts.estimators, points, cfg, bo);
  } catch (const std::exception& e) {
    throw PipelineError("bootstrap", label, e.what());
  }
  for (std::size_t i = 0; i < res.estimates.size(); ++i) {
    auto& est = res.estimates[i];
    est.ci_low = boot.intervals[i].low;
    est.ci_high = boot.intervals[i].high;
    est.bootstrap_reps = opts.reps;
    apply_relative_effect(est, data);
    res.widened.push_back(boot.intervals[i].widened);
  }

  // Heterogeneity on the DR CATE; reuse it when DR was among the estimators.
  const Vector* cate = nullptr;
  EffectEstimate dr;
  for (std::size_t i = 0; i < opts.estimators.size(); ++i)
    if (opts.estimators[i] == EstimatorKind::DR) cate = &res.estimates[i].cate;
  if (!cate) {
    dr = dr_learner_cate(data, cfg, ps);
    cate = &dr.cate;
  }
  try {
    res.heterogeneity = heterogeneity_table(cohort, data, *cate);
  } catch (const std::invalid_argument&) {
    // Fewer than three defined pairs: no correlations for this stratum.
  }
  return res;
}

}  // namespace

AnalysisReport run_pipeline(const RawTables& raw_in, const PipelineOptions& opts) {
  AnalysisReport rep;
  rep.config = opts.echo();
  RawTables raw;
  std::vector<LinkedCase> cases;
  try {
    raw = filter_tables(raw_in, opts.range, opts.voice_start);
    raw.validate();
  } catch (const std::exception& e) {
    throw PipelineError("ingest", "all", e.what());
  }
  try {
    cases = link_cases(raw);
  } catch (const std::exception& e) {
    throw PipelineError("link", "all", e.what());
  }
  rep.n_reports = static_cast<long>(raw.reports.size());
  rep.n_moderations = static_cast<long>(raw.moderations.size());
  rep.n_match_days = static_cast<long>(raw.match_days.size());
  rep.n_linked_cases = static_cast<long>(cases.size());
  const EventLog log(raw, opts.range);

  const auto strata = report_strata();
  for (std::size_t si = 0; si < opts.setups.size(); ++si) {
    const auto setup = StudySetup::from_kind(opts.setups[si]);
    for (std::size_t ti = 0; ti < strata.size(); ++ti) {
      const auto& stratum = strata[ti];
      const std::string label = std::string(to_string(setup.kind)) + "/" + stratum.label();
      StratumResult sr;
      sr.setup = setup.kind;
      sr.stratum = stratum;
      sr.severity_not_applicable = stratum.offense == OffenseType::Cheating;
      CohortTable cohort;
      try {
        cohort = build_cohort(cases, setup, log, stratum);
      } catch (const CohortDegenerate& e) {
        sr.degenerate = e.what();
        rep.strata.push_back(std::move(sr));
        continue;
      } catch (const std::exception& e) {
        throw PipelineError("cohort", label, e.what());
      }
      sr.input_cases = cohort.input_cases;
      sr.exclusions = cohort.exclusion_counts;
      sr.outcome_exclusions = cohort.outcome_exclusions;
      sr.n_treated = cohort.n_treated();
      sr.n_control = cohort.n_control();

      const std::uint64_t stream = 1000 * static_cast<std::uint64_t>(setup.kind) + ti;
      for (std::size_t oi = 0; oi < opts.outcomes.size(); ++oi)
        sr.outcomes.push_back(analyse_outcome(cohort, opts.outcomes[oi], opts, 16 * stream + oi, label));

      if (sr.n_treated >= opts.min_arm_size && sr.n_control >= opts.min_arm_size &&
          sr.n_control >= opts.match_k) {
        try {
          const auto data = make_estimation_data(cohort, Outcome::Participation);
          EstimatorConfig cfg;
          cfg.clip = opts.clip;
          sr.balance = balance_report(data, fit_propensity(data, cfg), opts.match_k);
        } catch (const std::exception& e) {
          throw PipelineError("balance", label, e.what());
        }
      }
      sr.cohort = std::move(cohort);
      rep.strata.push_back(std::move(sr));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------------------
// Rendering

std::string format_percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s + "%";
}

std::string format_effect(double relative, double ci_low, double ci_high, double level) {
  char lv[16];
  std::snprintf(lv, sizeof lv, "%g", 100.0 * level);
  return format_percent(relative) + " (" + lv + "% CI: " + format_percent(ci_low) + ", " + format_percent(ci_high) +
         ")";
}

namespace {

std::string fmt_abs(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '|') c = ';';
  return s;
}

std::string stratum_name(const Stratum& s) { return s.severity ? std::string(to_string(*s.severity)) : "pooled"; }

}  // namespace

std::vector<EffectRow> effect_rows(const AnalysisReport& report) {
  std::vector<EffectRow> rows;
  for (const auto& sr : report.strata) {
    EffectRow base;
    base.setup = to_string(sr.setup);
    base.offense = to_string(*sr.stratum.offense);
    base.stratum = stratum_name(sr.stratum);
    if (sr.degenerate) {
      auto r = base;
      r.status = "degenerate";
      r.note = sanitize(*sr.degenerate);
      rows.push_back(r);
    } else {
      for (const auto& o : sr.outcomes) {
        auto r = base;
        r.outcome = to_string(o.outcome);
        if (o.degenerate) {
          r.status = "degenerate";
          r.note = sanitize(*o.degenerate);
          rows.push_back(r);
          continue;
        }
        for (std::size_t i = 0; i < o.estimates.size(); ++i) {
          const auto& e = o.estimates[i];
          auto q = r;
          q.status = "ok";
          q.estimator = e.estimator;
          q.ate = fmt_abs(e.ate);
          q.ci_low = fmt_abs(e.ci_low);
          q.ci_high = fmt_abs(e.ci_high);
          q.relative = format_percent(e.ate_relative);
          q.relative_ci_low = format_percent(e.ci_low_relative);
          q.relative_ci_high = format_percent(e.ci_high_relative);
          q.n_treated = std::to_string(e.n_treated);
          q.n_control = std::to_string(e.n_control);
          if (i < o.widened.size() && o.widened[i]) q.note = "interval widened to point estimate";
          rows.push_back(q);
        }
      }
    }
    if (sr.severity_not_applicable) {
      auto r = base;
      r.stratum = "severity";
      r.status = "not_applicable";
      r.note = "NotApplicable";
      rows.push_back(r);
    }
  }
  return rows;
}

namespace {

constexpr const char* kCsvHeader =
    "setup,offense,stratum,outcome,estimator,status,ate,ci_low,ci_high,relative_effect,relative_ci_low,"
    "relative_ci_high,n_treated,n_control,note";

}  // namespace

void render_effect_table(std::ostream& out, const std::vector<EffectRow>& rows) {
  out << "setup | offense | stratum | outcome | estimator | relative effect | ATE (95% CI) | n_t | n_c\n";
  for (const auto& r : rows) {
    out << r.setup << " | " << r.offense << " | " << r.stratum << " | " << (r.outcome.empty() ? "-" : r.outcome)
        << " | " << (r.estimator.empty() ? "-" : r.estimator) << " | ";
    if (r.status == "ok") {
      out << r.relative << " (95% CI: " << r.relative_ci_low << ", " << r.relative_ci_high << ") | " << r.ate << " ("
          << r.ci_low << ", " << r.ci_high << ") | " << r.n_treated << " | " << r.n_control;
      if (!r.note.empty()) out << " | " << r.note;
    } else if (r.status == "degenerate") {
      out << kDegenerateCell << " | " << r.note;
    } else {
      out << r.note;
    }
    out << '\n';
  }
}

void render_effect_csv(std::ostream& out, const std::vector<EffectRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.setup << ',' << r.offense << ',' << r.stratum << ',' << r.outcome << ',' << r.estimator << ',' << r.status
        << ',' << r.ate << ',' << r.ci_low << ',' << r.ci_high << ',' << r.relative << ',' << r.relative_ci_low << ','
        << r.relative_ci_high << ',' << r.n_treated << ',' << r.n_control << ',' << r.note << '\n';
}

std::vector<EffectRow> read_effect_csv(std::istream& in, const std::string& name) {
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError(name, 0, "empty file");
  const csv::Header h(line);
  const std::vector<std::string> cols = {"setup",   "offense",          "stratum",         "outcome",
                                         "estimator", "status",         "ate",             "ci_low",
                                         "ci_high", "relative_effect",  "relative_ci_low", "relative_ci_high",
                                         "n_treated", "n_control",      "note"};
  std::vector<std::size_t> idx;
  try {
    for (const auto& c : cols) idx.push_back(h.require(c));
  } catch (const std::exception& e) {
    throw ParseError(name, reader.line_no(), e.what());
  }
  std::vector<EffectRow> rows;
  while (reader.next(line)) {
    const auto f = csv::split(line);
    if (f.size() != h.size()) throw ParseError(name, reader.line_no(), "wrong number of fields");
    auto get = [&](std::size_t k) { return std::string(f[idx[k]]); };
    rows.push_back({get(0), get(1), get(2), get(3), get(4), get(5), get(6), get(7), get(8), get(9), get(10), get(11),
                    get(12), get(13), get(14)});
  }
  return rows;
}

void render_report_text(std::ostream& out, const AnalysisReport& report) {
  out << "modcausal analysis report\n\nconfig\n";
  for (const auto& [k, v] : report.config) out << "  " << k << " = " << v << '\n';
  out << "\ninput\n"
      << "  reports = " << report.n_reports << '\n'
      << "  moderations = " << report.n_moderations << '\n'
      << "  match_days = " << report.n_match_days << '\n'
      << "  linked_cases = " << report.n_linked_cases << "\n\neffects\n";
  render_effect_table(out, effect_rows(report));

  out << "\nexclusions\n";
  for (const auto& sr : report.strata) {
    if (sr.degenerate && sr.input_cases == 0) continue;
    out << "  " << to_string(sr.setup) << '/' << sr.stratum.label() << ": input " << sr.input_cases << ", treated "
        << sr.n_treated << ", control " << sr.n_control;
    for (const auto& [k, v] : sr.exclusions) out << ", " << k << ' ' << v;
    for (const auto& [k, v] : sr.outcome_exclusions) out << ", " << k << ' ' << v;
    out << '\n';
  }

  out << "\nbalance (mean |SMD| before -> after matching)\n";
  char buf[128];
  for (const auto& sr : report.strata) {
    if (!sr.balance) continue;
    std::snprintf(buf, sizeof buf, "%.4f -> %.4f", sr.balance->mean_abs_smd_before(), sr.balance->mean_abs_smd_after());
    out << "  " << to_string(sr.setup) << '/' << sr.stratum.label() << ": " << buf << '\n';
  }

  out << "\nheterogeneity (Pearson r of DR CATE with skill indicators)\n";
  for (const auto& sr : report.strata)
    for (const auto& o : sr.outcomes) {
      if (o.heterogeneity.empty()) continue;
      out << "  " << to_string(sr.setup) << '/' << sr.stratum.label() << '/' << to_string(o.outcome) << ':';
      for (const auto& h : o.heterogeneity) {
        if (h.corr.r) {
          std::snprintf(buf, sizeof buf, "%.4f", *h.corr.r);
          out << ' ' << h.indicator << ' ' << buf << " (n " << h.corr.n_used << ')';
        } else {
          out << ' ' << h.indicator << " undefined (n " << h.corr.n_used << ')';
        }
      }
      out << '\n';
    }
}

void render_balance_csv(std::ostream& out, const AnalysisReport& report) {
  out << "setup,offense,stratum,feature,mean_treated,mean_control,smd_before,smd_after\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  for (const auto& sr : report.strata) {
    if (!sr.balance) continue;
    for (const auto& f : sr.balance->features)
      out << to_string(sr.setup) << ',' << to_string(*sr.stratum.offense) << ',' << stratum_name(sr.stratum) << ','
          << f.feature << ',' << csv::format_double(f.mean_treated) << ',' << csv::format_double(f.mean_control) << ','
          << opt(f.smd_before) << ',' << opt(f.smd_after) << '\n';
  }
}

void render_heterogeneity_csv(std::ostream& out, const AnalysisReport& report) {
  out << "setup,offense,stratum,outcome,indicator,pearson_r,n_used\n";
  for (const auto& sr : report.strata)
    for (const auto& o : sr.outcomes)
      for (const auto& h : o.heterogeneity)
        out << to_string(sr.setup) << ',' << to_string(*sr.stratum.offense) << ',' << stratum_name(sr.stratum) << ','
            << to_string(o.outcome) << ',' << h.indicator << ',' << (h.corr.r ? csv::format_double(*h.corr.r) : "")
            << ',' << h.corr.n_used << '\n';
}

void write_report_dir(const std::string& dir, const AnalysisReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("report.txt");
    render_report_text(f, report);
  }
  {
    auto f = open("report.csv");
    render_effect_csv(f, effect_rows(report));
  }
  {
    auto f = open("balance.csv");
    render_balance_csv(f, report);
  }
  {
    auto f = open("heterogeneity.csv");
    render_heterogeneity_csv(f, report);
  }
  for (const auto& sr : report.strata) {
    if (!sr.cohort) continue;
    auto f = open("cohort_" + std::string(to_string(sr.setup)) + "_" + std::string(to_string(*sr.stratum.offense)) +
                  "_" + stratum_name(sr.stratum) + ".csv");
    write_cohort_csv(f, *sr.cohort);
  }
}

}  // namespace modcausal
