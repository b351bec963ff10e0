#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modcausal/cohort.hpp"
#include "modcausal/diagnostics.hpp"
#include "modcausal/ingestion.hpp"
#include "modcausal/meta_learners.hpp"

namespace modcausal {

struct PipelineOptions {
  std::vector<SetupKind> setups = {SetupKind::ModerationVsNone, SetupKind::QuickVsDelayed};
  std::vector<Outcome> outcomes = {Outcome::ReportRate, Outcome::Participation};
  std::vector<EstimatorKind> estimators = {EstimatorKind::DR};
  LearnerSpec base = LearnerSpec::gbt_default();
  /// Unset: trees for ModerationVsNone, linear for QuickVsDelayed.
  std::optional<LearnerSpec> effect;
  ClipBounds clip;
  bool dr_cross_fit = false;
  int reps = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
  int match_k = 1;
  /// Strata with fewer rows in either arm are reported as degenerate.
  long min_arm_size = 10;
  DateRange range = default_study_range();
  Day voice_start = default_voice_start();
  /// Extra lines echoed verbatim (input paths and the like).
  std::vector<std::pair<std::string, std::string>> extra_echo;

  LearnerSpec effect_for(SetupKind s) const;
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct OutcomeResult {
  Outcome outcome = Outcome::ReportRate;
  std::optional<std::string> degenerate;
  std::vector<EffectEstimate> estimates;
  std::vector<bool> widened;  // per estimate: bootstrap interval extended to the point estimate
  std::vector<HeterogeneityRow> heterogeneity;  // on DR CATE
};

struct StratumResult {
  SetupKind setup = SetupKind::ModerationVsNone;
  Stratum stratum;
  bool severity_not_applicable = false;  // pooled cheating row: no severity breakdown exists
  std::optional<std::string> degenerate;
  long input_cases = 0;
  std::map<std::string, long> exclusions;
  std::map<std::string, long> outcome_exclusions;
  long n_treated = 0, n_control = 0;
  std::optional<BalanceReport> balance;
  std::vector<OutcomeResult> outcomes;
  std::optional<CohortTable> cohort;
};

struct AnalysisReport {
  std::vector<std::pair<std::string, std::string>> config;
  long n_reports = 0, n_moderations = 0, n_match_days = 0, n_linked_cases = 0;
  std::vector<StratumResult> strata;

  /// True when no stratum produced any estimate.
  bool all_degenerate() const;
};

/// An error raised inside the pipeline, tagged with the stage and stratum.
struct PipelineError : std::runtime_error {
  PipelineError(std::string stage, std::string stratum, const std::string& what);
  std::string stage;
  std::string stratum;
};

/// Strata analysed per setup: per offense the pooled stratum and, where the severity
/// taxonomy applies, one stratum per severity.
std::vector<Stratum> report_strata();

AnalysisReport run_pipeline(const RawTables& raw, const PipelineOptions& opts);

/// One rendered line; every field is already formatted so text and CSV share values.
struct EffectRow {
  std::string setup, offense, stratum, outcome, estimator, status;
  std::string ate, ci_low, ci_high;
  std::string relative, relative_ci_low, relative_ci_high;
  std::string n_treated, n_control;
  std::string note;
};

std::vector<EffectRow> effect_rows(const AnalysisReport& report);

/// "-50.00% (95% CI: -60.00%, -40.00%)".
std::string format_effect(double relative, double ci_low, double ci_high, double level = 0.95);
std::string format_percent(double v);
inline constexpr const char* kDegenerateCell = "— (degenerate)";

void render_effect_table(std::ostream& out, const std::vector<EffectRow>& rows);
void render_effect_csv(std::ostream& out, const std::vector<EffectRow>& rows);
std::vector<EffectRow> read_effect_csv(std::istream& in, const std::string& name);

/// Full text report: config echo, input counts, effect table, exclusions, balance and
/// heterogeneity blocks.
void render_report_text(std::ostream& out, const AnalysisReport& report);
void render_balance_csv(std::ostream& out, const AnalysisReport& report);
void render_heterogeneity_csv(std::ostream& out, const AnalysisReport& report);

/// Writes report.txt, report.csv, balance.csv, heterogeneity.csv and one cohort CSV per
/// analysed stratum into `dir`.
void write_report_dir(const std::string& dir, const AnalysisReport& report);

}  // namespace modcausal
