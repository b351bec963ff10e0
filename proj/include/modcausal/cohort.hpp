#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modcausal/domain.hpp"
#include "modcausal/ingestion.hpp"

namespace modcausal {

enum class SetupKind { ModerationVsNone, QuickVsDelayed };
enum class PostAnchor { ReportDate, ModerationDate };

struct StudySetup {
  SetupKind kind;
  int treat_max_lag;
  int control_min_lag;
  PostAnchor post_anchor;

  static StudySetup moderation_vs_none() { return {SetupKind::ModerationVsNone, 0, 7, PostAnchor::ReportDate}; }
  static StudySetup quick_vs_delayed() { return {SetupKind::QuickVsDelayed, 3, 7, PostAnchor::ModerationDate}; }
  static StudySetup from_kind(SetupKind k) {
    return k == SetupKind::ModerationVsNone ? moderation_vs_none() : quick_vs_delayed();
  }
};

std::string_view to_string(SetupKind k);
SetupKind parse_setup(std::string_view s);

enum class Assignment { Treated, Control, Excluded };

Assignment assign_treatment(const LinkedCase& c, const StudySetup& setup);

inline constexpr int kWindowDays = 7;

struct Window {
  Day first;
  Day last;  // inclusive
};

/// Pre-report week [T-7, T-1]; identical for both setups.
Window baseline_window(const LinkedCase& c);
/// [T, T+6] when anchored on the report, [M, M+6] when anchored on the moderation.
Window outcome_window(const LinkedCase& c, const StudySetup& setup);

/// Reports per match in w1 minus reports per match in w0; empty when either window has
/// no matches.
std::optional<double> compute_delta_report_rate(const LinkedCase& c, const StudySetup& setup, const EventLog& log);
/// Active days in w1 over 7 minus active days in w0 over 7.
double compute_delta_participation(const LinkedCase& c, const StudySetup& setup, const EventLog& log);

struct CohortRow {
  PlayerId player_id;
  int treated = 0;
  CovariateVector covariates{};
  std::optional<double> delta_report_rate;
  double delta_participation = 0.0;
  OffenseType offense_type = OffenseType::Cheating;
  std::optional<Severity> severity;
  std::optional<double> baseline_report_rate;
  double baseline_participation = 0.0;
  int lag = 0;
};

struct Stratum {
  std::optional<OffenseType> offense;
  std::optional<Severity> severity;

  bool matches(const LinkedCase& c) const;
  /// e.g. "OffensiveTextChat/Stricter", "all/pooled".
  std::string label() const;
};

struct CohortDegenerate : std::runtime_error {
  CohortDegenerate(const Stratum& s, const std::string& why);
  Stratum stratum;
};

/// Case-level exclusion reasons.
inline constexpr const char* kExclLagGap = "lag_gap";
inline constexpr const char* kExclCovariateIncomplete = "covariate_incomplete";
inline constexpr const char* kExclWindowBeforeLog = "window_before_log";
inline constexpr const char* kExclWindowAfterLog = "window_after_log";
/// Outcome-level: row kept for participation, dropped from report-rate analyses.
inline constexpr const char* kExclZeroMatchWindow = "zero_match_window";

struct CohortTable {
  StudySetup setup;
  Stratum stratum;
  std::vector<CohortRow> rows;  // sorted by player_id
  std::map<std::string, long> exclusion_counts;
  std::map<std::string, long> outcome_exclusions;
  long input_cases = 0;

  long excluded_cases() const;
  long n_treated() const;
  long n_control() const;
};

/// Filters `cases` by the stratum, assigns arms, computes outcomes. Throws CohortDegenerate
/// when either arm ends up empty.
CohortTable build_cohort(const std::vector<LinkedCase>& cases, const StudySetup& setup, const EventLog& log,
                         const Stratum& stratum = {});

void write_cohort_csv(std::ostream& out, const CohortTable& cohort);
CohortTable read_cohort_csv(std::istream& in, const std::string& name, const StudySetup& setup);

}  // namespace modcausal
