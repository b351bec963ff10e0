#include "modcausal/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "csv.hpp"

namespace modcausal {

ParseError::ParseError(const std::string& file, std::size_t line_no, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line_no) + ": " + what), line(line_no) {}

DateRange default_study_range() { return {parse_day("2023-02-01"), parse_day("2023-04-12")}; }
Day default_voice_start() { return parse_day("2023-03-21"); }

void RawTables::validate() const {
  for (const auto& m : moderations) modcausal::validate(m);
  std::set<std::pair<std::string_view, Day>> seen;
  for (const auto& r : match_days) {
    modcausal::validate(r);
    if (!seen.emplace(r.player_id, r.date).second)
      throw std::invalid_argument("duplicate match day for " + r.player_id + " on " + format_day(r.date));
  }
}

namespace {

template <typename RowFn>
void read_table(std::istream& in, const std::string& name, RowFn&& fn) {
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError(name, reader.line_no(), "missing header");
  csv::Header header;
  try {
    header = csv::Header(line);
    fn(header, std::vector<std::string_view>{}, true);
  } catch (const std::exception& e) {
    throw ParseError(name, reader.line_no(), e.what());
  }
  while (reader.next(line)) {
    try {
      auto fields = csv::split(line);
      if (fields.size() != header.size())
        throw std::invalid_argument("expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
      fn(header, fields, false);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(name, reader.line_no(), e.what());
    }
  }
}

std::optional<std::size_t> optional_column(const csv::Header& h, const char* name) { return h.find(name); }

}  // namespace

RawTables read_reports_csv(std::istream& in, const std::string& name, RawTables into) {
  std::size_t c_player = 0, c_date = 0, c_offense = 0;
  std::optional<std::size_t> c_reporter;
  read_table(in, name, [&](const csv::Header& h, const std::vector<std::string_view>& f, bool header) {
    if (header) {
      c_player = h.require("player_id");
      c_date = h.require("report_date");
      c_offense = h.require("offense_type");
      c_reporter = optional_column(h, "reporter_id");
      return;
    }
    ReportEvent r{std::string(f[c_player]), parse_day(f[c_date]), parse_offense(f[c_offense]), std::nullopt};
    if (r.player_id.empty()) throw std::invalid_argument("empty player_id");
    if (c_reporter && !f[*c_reporter].empty()) r.reporter_id = std::string(f[*c_reporter]);
    into.reports.push_back(std::move(r));
  });
  return into;
}

RawTables read_moderations_csv(std::istream& in, const std::string& name, RawTables into) {
  std::size_t c_player = 0, c_date = 0, c_offense = 0, c_actions = 0;
  std::optional<std::size_t> c_reporters;
  read_table(in, name, [&](const csv::Header& h, const std::vector<std::string_view>& f, bool header) {
    if (header) {
      c_player = h.require("player_id");
      c_date = h.require("moderation_date");
      c_offense = h.require("offense_type");
      c_actions = h.require("actions");
      c_reporters = optional_column(h, "linked_reporters");
      return;
    }
    ModerationEvent m{std::string(f[c_player]), parse_day(f[c_date]), parse_offense(f[c_offense]),
                      ActionMultiset::parse(f[c_actions]), {}};
    if (m.player_id.empty()) throw std::invalid_argument("empty player_id");
    if (c_reporters)
      for (auto tok : csv::split(f[*c_reporters], ';'))
        if (!tok.empty()) m.linked_reporters.emplace_back(tok);
    validate(m);
    into.moderations.push_back(std::move(m));
  });
  return into;
}

RawTables read_matches_csv(std::istream& in, const std::string& name, RawTables into) {
  std::size_t c_player = 0, c_date = 0, c_matches = 0;
  std::array<std::size_t, kNumCovariates> c_stats{};
  read_table(in, name, [&](const csv::Header& h, const std::vector<std::string_view>& f, bool header) {
    if (header) {
      c_player = h.require("player_id");
      c_date = h.require("date");
      c_matches = h.require("matches_played");
      for (std::size_t k = 0; k < kNumCovariates; ++k) c_stats[k] = h.require(std::string(kCovariateNames[k]));
      return;
    }
    MatchDayRecord r;
    r.player_id = std::string(f[c_player]);
    if (r.player_id.empty()) throw std::invalid_argument("empty player_id");
    r.date = parse_day(f[c_date]);
    const long m = csv::parse_long(f[c_matches]);
    if (m < 0) throw std::invalid_argument("negative matches_played");
    r.matches_played = static_cast<std::uint32_t>(m);
    std::size_t present = 0;
    for (auto c : c_stats) present += f[c].empty() ? 0 : 1;
    if (present == kNumCovariates) {
      CovariateVector v{};
      for (std::size_t k = 0; k < kNumCovariates; ++k) v[k] = csv::parse_double(f[c_stats[k]]);
      r.stats = v;
    } else if (present != 0) {
      throw std::invalid_argument("match stats must be all present or all empty");
    }
    validate(r);
    into.match_days.push_back(std::move(r));
  });
  return into;
}

RawTables filter_tables(RawTables raw, const DateRange& range, Day voice_start) {
  std::erase_if(raw.reports, [&](const ReportEvent& r) {
    return !range.contains(r.report_date) ||
           (r.offense_type == OffenseType::OffensiveVoiceChat && r.report_date < voice_start);
  });
  std::erase_if(raw.moderations, [&](const ModerationEvent& m) { return !range.contains(m.moderation_date); });
  std::erase_if(raw.match_days, [&](const MatchDayRecord& d) { return !range.contains(d.date); });
  return raw;
}

namespace {

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

RawTables load_event_log(const EventLogPaths& paths, const DateRange& range, Day voice_start) {
  RawTables raw;
  {
    auto in = open_input(paths.reports);
    raw = read_reports_csv(in, paths.reports.string(), std::move(raw));
  }
  {
    auto in = open_input(paths.moderations);
    raw = read_moderations_csv(in, paths.moderations.string(), std::move(raw));
  }
  {
    auto in = open_input(paths.matches);
    raw = read_matches_csv(in, paths.matches.string(), std::move(raw));
  }
  raw = filter_tables(std::move(raw), range, voice_start);
  raw.validate();
  return raw;
}

void write_reports_csv(std::ostream& out, const std::vector<ReportEvent>& rows) {
  out << "player_id,report_date,offense_type,reporter_id\n";
  for (const auto& r : rows)
    out << r.player_id << ',' << format_day(r.report_date) << ',' << to_string(r.offense_type) << ','
        << r.reporter_id.value_or("") << '\n';
}

void write_moderations_csv(std::ostream& out, const std::vector<ModerationEvent>& rows) {
  out << "player_id,moderation_date,offense_type,actions,linked_reporters\n";
  for (const auto& m : rows) {
    out << m.player_id << ',' << format_day(m.moderation_date) << ',' << to_string(m.offense_type) << ','
        << m.actions.to_string() << ',';
    for (std::size_t i = 0; i < m.linked_reporters.size(); ++i) out << (i ? ";" : "") << m.linked_reporters[i];
    out << '\n';
  }
}

void write_matches_csv(std::ostream& out, const std::vector<MatchDayRecord>& rows) {
  out << "player_id,date,matches_played";
  for (auto n : kCovariateNames) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.player_id << ',' << format_day(r.date) << ',' << r.matches_played;
    for (std::size_t k = 0; k < kNumCovariates; ++k) {
      out << ',';
      if (r.stats) out << csv::format_double((*r.stats)[k]);
    }
    out << '\n';
  }
}

void write_event_log(const EventLogPaths& paths, const RawTables& raw) {
  auto r = open_output(paths.reports);
  write_reports_csv(r, raw.reports);
  auto m = open_output(paths.moderations);
  write_moderations_csv(m, raw.moderations);
  auto d = open_output(paths.matches);
  write_matches_csv(d, raw.match_days);
}

// ---------------------------------------------------------------------------------------
// EventLog

EventLog::EventLog(const RawTables& raw, DateRange coverage) : coverage_(coverage) {
  for (const auto& r : raw.reports) players_[r.player_id].reports.push_back(r.report_date);
  for (const auto& d : raw.match_days) players_[d.player_id].days.push_back(d);
  for (auto& [_, h] : players_) {
    std::sort(h.reports.begin(), h.reports.end());
    std::sort(h.days.begin(), h.days.end(),
              [](const MatchDayRecord& a, const MatchDayRecord& b) { return a.date < b.date; });
  }
}

const EventLog::History* EventLog::find(const PlayerId& p) const {
  auto it = players_.find(p);
  return it == players_.end() ? nullptr : &it->second;
}

namespace {

template <typename F>
void for_days(const std::vector<MatchDayRecord>& days, Day from, Day to, F&& f) {
  auto it = std::lower_bound(days.begin(), days.end(), from,
                             [](const MatchDayRecord& r, Day d) { return r.date < d; });
  for (; it != days.end() && it->date <= to; ++it) f(*it);
}

}  // namespace

int EventLog::reports_received(const PlayerId& p, Day from, Day to) const {
  const auto* h = find(p);
  if (!h) return 0;
  auto lo = std::lower_bound(h->reports.begin(), h->reports.end(), from);
  auto hi = std::upper_bound(h->reports.begin(), h->reports.end(), to);
  return static_cast<int>(hi - lo);
}

long EventLog::matches_played(const PlayerId& p, Day from, Day to) const {
  const auto* h = find(p);
  long total = 0;
  if (h) for_days(h->days, from, to, [&](const MatchDayRecord& r) { total += r.matches_played; });
  return total;
}

int EventLog::active_days(const PlayerId& p, Day from, Day to) const {
  const auto* h = find(p);
  int n = 0;
  if (h) for_days(h->days, from, to, [&](const MatchDayRecord& r) { n += r.matches_played > 0 ? 1 : 0; });
  return n;
}

std::optional<CovariateVector> EventLog::covariate_means(const PlayerId& p, Day from, Day to) const {
  const auto* h = find(p);
  if (!h) return std::nullopt;
  CovariateVector sum{};
  double matches = 0.0;
  for_days(h->days, from, to, [&](const MatchDayRecord& r) {
    if (r.matches_played == 0) return;
    const double w = r.matches_played;
    for (std::size_t k = 0; k < kNumCovariates; ++k) sum[k] += w * (*r.stats)[k];
    matches += w;
  });
  if (matches == 0.0) return std::nullopt;
  for (auto& v : sum) v /= matches;
  return sum;
}

// ---------------------------------------------------------------------------------------
// Linking

namespace {

struct ModKey {
  std::string_view player;
  OffenseType offense;
  Day date;
  friend auto operator<=>(const ModKey&, const ModKey&) = default;
};

struct MergedModeration {
  ActionMultiset actions;
  std::optional<Day> earliest_report;
};

}  // namespace

std::vector<LinkedCase> link_cases(const RawTables& raw) {
  // Same-day moderations of the same offense act as one event.
  std::map<ModKey, MergedModeration> moderations;
  for (const auto& m : raw.moderations)
    moderations[{m.player_id, m.offense_type, m.moderation_date}].actions.merge(m.actions);

  // Each report attaches to the first moderation that can have acted on it (minimum lag).
  for (const auto& r : raw.reports) {
    auto it = moderations.lower_bound({r.player_id, r.offense_type, r.report_date});
    if (it == moderations.end() || it->first.player != r.player_id || it->first.offense != r.offense_type)
      continue;
    if (days_between(r.report_date, it->first.date) > kMaxLinkLag) continue;
    auto& earliest = it->second.earliest_report;
    // Keeping the earliest linked report gives the longest delay for this moderation.
    if (!earliest || r.report_date < *earliest) earliest = r.report_date;
  }

  // Per player keep the first linked moderation; ties on the day go to the longest delay.
  struct Pick {
    const ModKey* key;
    const MergedModeration* mod;
  };
  std::map<std::string_view, Pick> chosen;
  for (const auto& [key, mod] : moderations) {
    if (!mod.earliest_report) continue;
    auto [it, inserted] = chosen.try_emplace(key.player, Pick{&key, &mod});
    if (inserted) continue;
    const auto& cur = *it->second.key;
    const auto cur_t = *it->second.mod->earliest_report;
    if (std::tie(key.date, *mod.earliest_report, key.offense) < std::tie(cur.date, cur_t, cur.offense))
      it->second = Pick{&key, &mod};
  }

  EventLog log(raw, DateRange{Day::min(), Day::max()});
  std::vector<LinkedCase> out;
  out.reserve(chosen.size());
  for (const auto& [player, pick] : chosen) {
    LinkedCase c;
    c.player_id = std::string(player);
    c.report_date = *pick.mod->earliest_report;
    c.moderation_date = pick.key->date;
    c.lag = days_between(c.report_date, c.moderation_date);
    c.offense_type = pick.key->offense;
    c.actions = pick.mod->actions;
    c.severity = try_classify_severity(c.offense_type, c.actions);
    c.covariates = log.covariate_means(c.player_id, c.report_date - kCovariateWindowDays, c.report_date - 1);
    out.push_back(std::move(c));
  }
  return out;
}

void write_linked_cases_csv(std::ostream& out, const std::vector<LinkedCase>& cases) {
  out << "player_id,report_date,moderation_date,lag,offense_type,actions,severity,covariate_complete";
  for (auto n : kCovariateNames) out << ',' << n;
  out << '\n';
  for (const auto& c : cases) {
    out << c.player_id << ',' << format_day(c.report_date) << ',' << format_day(c.moderation_date) << ','
        << c.lag << ',' << to_string(c.offense_type) << ',' << c.actions.to_string() << ','
        << (c.severity ? to_string(*c.severity) : std::string_view("Unclassifiable")) << ','
        << (c.covariates ? 1 : 0);
    for (std::size_t k = 0; k < kNumCovariates; ++k) {
      out << ',';
      if (c.covariates) out << csv::format_double((*c.covariates)[k]);
    }
    out << '\n';
  }
}

}  // namespace modcausal
