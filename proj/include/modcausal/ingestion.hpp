#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "modcausal/domain.hpp"

namespace modcausal {

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line;
};

struct DateRange {
  Day start;
  Day end;  // inclusive
  bool contains(Day d) const { return d >= start && d <= end; }
};

/// Default study window and the first day voice-chat reports are usable.
DateRange default_study_range();
Day default_voice_start();

struct RawTables {
  std::vector<ReportEvent> reports;
  std::vector<ModerationEvent> moderations;
  std::vector<MatchDayRecord> match_days;

  /// Throws on duplicate (player_id, date) match-day rows or invalid records.
  void validate() const;
};

struct EventLogPaths {
  std::filesystem::path reports;
  std::filesystem::path moderations;
  std::filesystem::path matches;
};

RawTables read_reports_csv(std::istream& in, const std::string& name, RawTables into = {});
RawTables read_moderations_csv(std::istream& in, const std::string& name, RawTables into = {});
RawTables read_matches_csv(std::istream& in, const std::string& name, RawTables into = {});

/// Applies the date-range filter to all three tables and drops voice-chat reports dated
/// before `voice_start`.
RawTables filter_tables(RawTables raw, const DateRange& range, Day voice_start);

RawTables load_event_log(const EventLogPaths& paths, const DateRange& range, Day voice_start);

void write_reports_csv(std::ostream& out, const std::vector<ReportEvent>& rows);
void write_moderations_csv(std::ostream& out, const std::vector<ModerationEvent>& rows);
void write_matches_csv(std::ostream& out, const std::vector<MatchDayRecord>& rows);
void write_event_log(const EventLogPaths& paths, const RawTables& raw);

/// Read-only index over the raw tables for window queries. Days outside `coverage` are
/// treated as unobserved.
class EventLog {
 public:
  EventLog(const RawTables& raw, DateRange coverage);

  const DateRange& coverage() const { return coverage_; }
  bool covers(Day from, Day to) const { return from >= coverage_.start && to <= coverage_.end; }

  /// All window bounds below are inclusive.
  int reports_received(const PlayerId& p, Day from, Day to) const;
  long matches_played(const PlayerId& p, Day from, Day to) const;
  int active_days(const PlayerId& p, Day from, Day to) const;
  /// Per-match means, weighting each day's means by its match count. Empty when no matches.
  std::optional<CovariateVector> covariate_means(const PlayerId& p, Day from, Day to) const;

 private:
  struct History {
    std::vector<Day> reports;              // sorted
    std::vector<MatchDayRecord> days;      // sorted by date
  };
  const History* find(const PlayerId& p) const;

  DateRange coverage_;
  std::unordered_map<PlayerId, History> players_;
};

struct LinkedCase {
  PlayerId player_id;
  Day report_date;
  Day moderation_date;
  int lag = 0;
  OffenseType offense_type = OffenseType::Cheating;
  ActionMultiset actions;
  std::optional<Severity> severity;            // empty: unclassifiable action set
  std::optional<CovariateVector> covariates;   // empty: no matches in the pre-report week

  bool covariate_complete() const { return covariates.has_value(); }
};

inline constexpr int kMaxLinkLag = 14;
inline constexpr int kCovariateWindowDays = 7;

/// One case per moderated player, sorted by player_id.
///
/// A report links to the nearest moderation of the same player and offense that falls
/// within 0..14 days after it. Moderations on the same (player, day, offense) are
/// merged, with their action lists concatenated. A moderation's report date T is the
/// earliest report linked to it, which is also the longest delay for that moderation.
/// When a player has several linked moderations the earliest one is kept.
/// Covariates are per-match means over [T-7, T-1].
std::vector<LinkedCase> link_cases(const RawTables& raw);

void write_linked_cases_csv(std::ostream& out, const std::vector<LinkedCase>& cases);

}  // namespace modcausal
