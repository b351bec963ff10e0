#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace modcausal {

/// Calendar day without time zone. Arithmetic is in whole days.
using Day = std::chrono::sys_days;

Day parse_day(std::string_view iso);  // YYYY-MM-DD
std::string format_day(Day d);
inline Day operator+(Day d, int n) { return d + std::chrono::days{n}; }
inline Day operator-(Day d, int n) { return d - std::chrono::days{n}; }
inline int days_between(Day from, Day to) { return static_cast<int>((to - from).count()); }

using PlayerId = std::string;

enum class OffenseType { Cheating, OffensiveTextChat, OffensiveUserID, OffensiveVoiceChat };
inline constexpr std::array<OffenseType, 4> kAllOffenses = {
    OffenseType::Cheating, OffenseType::OffensiveTextChat, OffenseType::OffensiveUserID,
    OffenseType::OffensiveVoiceChat};

enum class ModerationAction {
  RemoveFromLeaderboard,
  WarningNotice,
  PenaltyNotice,
  RenameUser,
  LimitAllowedRenames,
  UpdateClantag,
  RemoveClantag,
  DeleteProfile,
  FeatureFlag,
  RankingService,
};

enum class Severity { Milder, Stricter, NotApplicable };

std::string_view to_string(OffenseType o);
std::string_view to_string(ModerationAction a);
std::string_view to_string(Severity s);

/// Accepts canonical names ("OffensiveTextChat") and spaced forms ("Offensive Text Chat").
OffenseType parse_offense(std::string_view s);
ModerationAction parse_action(std::string_view s);
Severity parse_severity(std::string_view s);

/// Duplicates are meaningful (voice-chat escalation carries two feature flags).
/// Kept sorted so that equal multisets compare equal.
class ActionMultiset {
 public:
  ActionMultiset() = default;
  ActionMultiset(std::initializer_list<ModerationAction> actions);
  explicit ActionMultiset(std::vector<ModerationAction> actions);

  void add(ModerationAction a);
  void merge(const ActionMultiset& other);
  std::size_t count(ModerationAction a) const;
  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }
  const std::vector<ModerationAction>& items() const { return actions_; }

  /// Semicolon-joined canonical names.
  std::string to_string() const;
  static ActionMultiset parse(std::string_view joined);

  friend bool operator==(const ActionMultiset&, const ActionMultiset&) = default;

 private:
  std::vector<ModerationAction> actions_;
};

struct UnclassifiableActionSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Severity row lookup. Cheating is always NotApplicable; for the other offenses the
/// action multiset must equal one of the known rows exactly.
Severity classify_severity(OffenseType offense, const ActionMultiset& actions);
std::optional<Severity> try_classify_severity(OffenseType offense, const ActionMultiset& actions);

struct ReportEvent {
  PlayerId player_id;
  Day report_date;
  OffenseType offense_type;
  std::optional<std::string> reporter_id;
};

struct ModerationEvent {
  PlayerId player_id;
  Day moderation_date;
  OffenseType offense_type;
  ActionMultiset actions;
  std::vector<std::string> linked_reporters;
};

inline constexpr std::size_t kNumCovariates = 9;

/// Order matches the covariate vector used everywhere downstream.
enum class Covariate : std::size_t {
  MatchScore,
  Assists,
  Eliminations,
  Deaths,
  DistanceTraveled,
  MoveSpeed,
  DamageDone,
  DamageTaken,
  Accuracy,
};

inline constexpr std::array<std::string_view, kNumCovariates> kCovariateNames = {
    "match_score", "assists",      "eliminations", "deaths",  "distance_traveled",
    "move_speed",  "damage_done",  "damage_taken", "accuracy"};

using CovariateVector = std::array<double, kNumCovariates>;

/// One player-day. Stats are per-match means over that day's matches and are absent
/// when no match was played.
struct MatchDayRecord {
  PlayerId player_id;
  Day date;
  std::uint32_t matches_played = 0;
  std::optional<CovariateVector> stats;

  double stat(Covariate c) const { return (*stats)[static_cast<std::size_t>(c)]; }
};

void validate(const ModerationEvent& m);
void validate(const MatchDayRecord& r);

}  // namespace modcausal
