#include "modcausal/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace modcausal {

namespace {

std::string normalize_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("not an integer");
  return v;
}

}  // namespace

Day parse_day(std::string_view iso) {
  iso = trim(iso);
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
    throw std::invalid_argument("invalid date '" + std::string(iso) + "', expected YYYY-MM-DD");
  using namespace std::chrono;
  try {
    year_month_day ymd{year{parse_int(iso.substr(0, 4))},
                       month{static_cast<unsigned>(parse_int(iso.substr(5, 2)))},
                       day{static_cast<unsigned>(parse_int(iso.substr(8, 2)))}};
    if (!ymd.ok()) throw std::invalid_argument("bad calendar date");
    return sys_days{ymd};
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("invalid date '" + std::string(iso) + "'");
  }
}

std::string format_day(Day d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string_view to_string(OffenseType o) {
  switch (o) {
    case OffenseType::Cheating: return "Cheating";
    case OffenseType::OffensiveTextChat: return "OffensiveTextChat";
    case OffenseType::OffensiveUserID: return "OffensiveUserID";
    case OffenseType::OffensiveVoiceChat: return "OffensiveVoiceChat";
  }
  return "?";
}

std::string_view to_string(ModerationAction a) {
  switch (a) {
    case ModerationAction::RemoveFromLeaderboard: return "RemoveFromLeaderboard";
    case ModerationAction::WarningNotice: return "WarningNotice";
    case ModerationAction::PenaltyNotice: return "PenaltyNotice";
    case ModerationAction::RenameUser: return "RenameUser";
    case ModerationAction::LimitAllowedRenames: return "LimitAllowedRenames";
    case ModerationAction::UpdateClantag: return "UpdateClantag";
    case ModerationAction::RemoveClantag: return "RemoveClantag";
    case ModerationAction::DeleteProfile: return "DeleteProfile";
    case ModerationAction::FeatureFlag: return "FeatureFlag";
    case ModerationAction::RankingService: return "RankingService";
  }
  return "?";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Milder: return "Milder";
    case Severity::Stricter: return "Stricter";
    case Severity::NotApplicable: return "NotApplicable";
  }
  return "?";
}

OffenseType parse_offense(std::string_view s) {
  const std::string n = normalize_token(s);
  if (n == "cheating" || n == "cheater") return OffenseType::Cheating;
  if (n == "offensivetextchat") return OffenseType::OffensiveTextChat;
  if (n == "offensiveuserid" || n == "offensiveuseridentification") return OffenseType::OffensiveUserID;
  if (n == "offensivevoicechat") return OffenseType::OffensiveVoiceChat;
  throw std::invalid_argument("unknown offense type '" + std::string(s) + "'");
}

ModerationAction parse_action(std::string_view s) {
  const std::string n = normalize_token(s);
  if (n == "removefromleaderboard" || n == "removefromleaderboards")
    return ModerationAction::RemoveFromLeaderboard;
  if (n == "warningnotice") return ModerationAction::WarningNotice;
  if (n == "penaltynotice") return ModerationAction::PenaltyNotice;
  if (n == "renameuser") return ModerationAction::RenameUser;
  if (n == "limitallowedrenames") return ModerationAction::LimitAllowedRenames;
  if (n == "updateclantag") return ModerationAction::UpdateClantag;
  if (n == "removeclantag") return ModerationAction::RemoveClantag;
  if (n == "deleteprofile") return ModerationAction::DeleteProfile;
  if (n == "featureflag") return ModerationAction::FeatureFlag;
  if (n == "rankingservice") return ModerationAction::RankingService;
  throw std::invalid_argument("unknown moderation action '" + std::string(s) + "'");
}

Severity parse_severity(std::string_view s) {
  const std::string n = normalize_token(s);
  if (n == "milder") return Severity::Milder;
  if (n == "stricter") return Severity::Stricter;
  if (n == "notapplicable" || n == "n/a") return Severity::NotApplicable;
  throw std::invalid_argument("unknown severity '" + std::string(s) + "'");
}

ActionMultiset::ActionMultiset(std::initializer_list<ModerationAction> actions)
    : ActionMultiset(std::vector<ModerationAction>(actions)) {}

ActionMultiset::ActionMultiset(std::vector<ModerationAction> actions) : actions_(std::move(actions)) {
  std::sort(actions_.begin(), actions_.end());
}

void ActionMultiset::add(ModerationAction a) {
  actions_.insert(std::upper_bound(actions_.begin(), actions_.end(), a), a);
}

void ActionMultiset::merge(const ActionMultiset& other) {
  for (auto a : other.actions_) add(a);
}

std::size_t ActionMultiset::count(ModerationAction a) const {
  auto [lo, hi] = std::equal_range(actions_.begin(), actions_.end(), a);
  return static_cast<std::size_t>(hi - lo);
}

std::string ActionMultiset::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (i) out.push_back(';');
    out += modcausal::to_string(actions_[i]);
  }
  return out;
}

ActionMultiset ActionMultiset::parse(std::string_view joined) {
  std::vector<ModerationAction> out;
  while (!joined.empty()) {
    const auto pos = joined.find(';');
    const auto tok = trim(joined.substr(0, pos));
    if (!tok.empty()) out.push_back(parse_action(tok));
    if (pos == std::string_view::npos) break;
    joined.remove_prefix(pos + 1);
  }
  return ActionMultiset(std::move(out));
}

namespace {

using MA = ModerationAction;

struct SeverityRow {
  OffenseType offense;
  ActionMultiset actions;
  Severity severity;
};

const std::vector<SeverityRow>& severity_rows() {
  static const std::vector<SeverityRow> rows = {
      {OffenseType::OffensiveTextChat, {MA::WarningNotice, MA::FeatureFlag}, Severity::Milder},
      {OffenseType::OffensiveTextChat, {MA::PenaltyNotice, MA::FeatureFlag}, Severity::Stricter},
      {OffenseType::OffensiveUserID,
       {MA::RenameUser, MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice},
       Severity::Milder},
      {OffenseType::OffensiveUserID,
       {MA::RenameUser, MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice, MA::FeatureFlag},
       Severity::Stricter},
      {OffenseType::OffensiveVoiceChat, {MA::FeatureFlag}, Severity::Milder},
      {OffenseType::OffensiveVoiceChat, {MA::FeatureFlag, MA::FeatureFlag, MA::PenaltyNotice},
       Severity::Stricter},
  };
  return rows;
}

}  // namespace

std::optional<Severity> try_classify_severity(OffenseType offense, const ActionMultiset& actions) {
  if (actions.empty()) throw std::invalid_argument("classify_severity: empty action set");
  if (offense == OffenseType::Cheating) return Severity::NotApplicable;
  for (const auto& row : severity_rows())
    if (row.offense == offense && row.actions == actions) return row.severity;
  return std::nullopt;
}

Severity classify_severity(OffenseType offense, const ActionMultiset& actions) {
  if (auto s = try_classify_severity(offense, actions)) return *s;
  throw UnclassifiableActionSet("action set {" + actions.to_string() + "} has no severity row for " +
                                std::string(to_string(offense)));
}

void validate(const ModerationEvent& m) {
  if (m.actions.empty())
    throw std::invalid_argument("moderation event for " + m.player_id + " has no actions");
}

void validate(const MatchDayRecord& r) {
  if (r.matches_played == 0) {
    if (r.stats) throw std::invalid_argument("match day with zero matches carries stats");
    return;
  }
  if (!r.stats) throw std::invalid_argument("match day with matches is missing stats");
  for (double v : *r.stats)
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("match stat must be finite and non-negative");
  if (r.stat(Covariate::Accuracy) > 100.0) throw std::invalid_argument("accuracy above 100");
}

}  // namespace modcausal
