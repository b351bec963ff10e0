#include "modcausal/cohort.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "csv.hpp"

namespace modcausal {

std::string_view to_string(SetupKind k) {
  return k == SetupKind::ModerationVsNone ? "ModerationVsNone" : "QuickVsDelayed";
}

SetupKind parse_setup(std::string_view s) {
  if (s == "ModerationVsNone" || s == "A" || s == "a") return SetupKind::ModerationVsNone;
  if (s == "QuickVsDelayed" || s == "B" || s == "b") return SetupKind::QuickVsDelayed;
  throw std::invalid_argument("unknown setup '" + std::string(s) + "'");
}

Assignment assign_treatment(const LinkedCase& c, const StudySetup& setup) {
  if (c.lag <= setup.treat_max_lag) return Assignment::Treated;
  if (c.lag >= setup.control_min_lag) return Assignment::Control;
  return Assignment::Excluded;
}

Window baseline_window(const LinkedCase& c) {
  return {c.report_date - kWindowDays, c.report_date - 1};
}

Window outcome_window(const LinkedCase& c, const StudySetup& setup) {
  const Day anchor = setup.post_anchor == PostAnchor::ReportDate ? c.report_date : c.moderation_date;
  return {anchor, anchor + (kWindowDays - 1)};
}

std::optional<double> compute_delta_report_rate(const LinkedCase& c, const StudySetup& setup, const EventLog& log) {
  const auto w0 = baseline_window(c);
  const auto w1 = outcome_window(c, setup);
  const long m0 = log.matches_played(c.player_id, w0.first, w0.last);
  const long m1 = log.matches_played(c.player_id, w1.first, w1.last);
  if (m0 == 0 || m1 == 0) return std::nullopt;
  const double r0 = static_cast<double>(log.reports_received(c.player_id, w0.first, w0.last)) / m0;
  const double r1 = static_cast<double>(log.reports_received(c.player_id, w1.first, w1.last)) / m1;
  return r1 - r0;
}

double compute_delta_participation(const LinkedCase& c, const StudySetup& setup, const EventLog& log) {
  const auto w0 = baseline_window(c);
  const auto w1 = outcome_window(c, setup);
  return log.active_days(c.player_id, w1.first, w1.last) / 7.0 -
         log.active_days(c.player_id, w0.first, w0.last) / 7.0;
}

bool Stratum::matches(const LinkedCase& c) const {
  if (offense && c.offense_type != *offense) return false;
  if (severity && c.severity != severity) return false;
  return true;
}

std::string Stratum::label() const {
  std::string s = offense ? std::string(to_string(*offense)) : "all";
  s += '/';
  s += severity ? std::string(to_string(*severity)) : "pooled";
  return s;
}

CohortDegenerate::CohortDegenerate(const Stratum& s, const std::string& why)
    : std::runtime_error("degenerate cohort for stratum " + s.label() + ": " + why), stratum(s) {}

long CohortTable::excluded_cases() const {
  long n = 0;
  for (const auto& [_, v] : exclusion_counts) n += v;
  return n;
}

long CohortTable::n_treated() const {
  return std::count_if(rows.begin(), rows.end(), [](const CohortRow& r) { return r.treated == 1; });
}

long CohortTable::n_control() const { return static_cast<long>(rows.size()) - n_treated(); }

CohortTable build_cohort(const std::vector<LinkedCase>& cases, const StudySetup& setup, const EventLog& log,
                         const Stratum& stratum) {
  if (setup.treat_max_lag >= setup.control_min_lag)
    throw std::invalid_argument("treat_max_lag must be below control_min_lag");
  CohortTable table{setup, stratum, {}, {}, {}, 0};
  for (const auto& c : cases) {
    if (!stratum.matches(c)) continue;
    ++table.input_cases;
    const auto arm = assign_treatment(c, setup);
    if (arm == Assignment::Excluded) {
      ++table.exclusion_counts[kExclLagGap];
      continue;
    }
    const auto w0 = baseline_window(c);
    const auto w1 = outcome_window(c, setup);
    if (w0.first < log.coverage().start) {
      ++table.exclusion_counts[kExclWindowBeforeLog];
      continue;
    }
    if (w1.last > log.coverage().end) {
      ++table.exclusion_counts[kExclWindowAfterLog];
      continue;
    }
    if (!c.covariates) {
      ++table.exclusion_counts[kExclCovariateIncomplete];
      continue;
    }
    CohortRow row;
    row.player_id = c.player_id;
    row.treated = arm == Assignment::Treated ? 1 : 0;
    row.covariates = *c.covariates;
    row.delta_report_rate = compute_delta_report_rate(c, setup, log);
    if (!row.delta_report_rate) ++table.outcome_exclusions[kExclZeroMatchWindow];
    row.delta_participation = compute_delta_participation(c, setup, log);
    row.offense_type = c.offense_type;
    row.severity = c.severity;
    const long m0 = log.matches_played(c.player_id, w0.first, w0.last);
    if (m0 > 0)
      row.baseline_report_rate = static_cast<double>(log.reports_received(c.player_id, w0.first, w0.last)) / m0;
    row.baseline_participation = log.active_days(c.player_id, w0.first, w0.last) / 7.0;
    row.lag = c.lag;
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const CohortRow& a, const CohortRow& b) { return a.player_id < b.player_id; });
  const long nt = table.n_treated();
  const long nc = table.n_control();
  if (nt == 0 || nc == 0)
    throw CohortDegenerate(stratum, std::to_string(nt) + " treated, " + std::to_string(nc) + " control");
  return table;
}

namespace {

std::string opt_double(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

}  // namespace

void write_cohort_csv(std::ostream& out, const CohortTable& cohort) {
  out << "player_id,W";
  for (auto n : kCovariateNames) out << ',' << n;
  out << ",delta_report_rate,delta_participation,offense_type,severity,baseline_report_rate,"
         "baseline_participation,lag\n";
  for (const auto& r : cohort.rows) {
    out << r.player_id << ',' << r.treated;
    for (double v : r.covariates) out << ',' << csv::format_double(v);
    out << ',' << opt_double(r.delta_report_rate) << ',' << csv::format_double(r.delta_participation) << ','
        << to_string(r.offense_type) << ','
        << (r.severity ? to_string(*r.severity) : std::string_view("Unclassifiable")) << ','
        << opt_double(r.baseline_report_rate) << ',' << csv::format_double(r.baseline_participation) << ','
        << r.lag << '\n';
  }
}

CohortTable read_cohort_csv(std::istream& in, const std::string& name, const StudySetup& setup) {
  CohortTable table{setup, {}, {}, {}, {}, 0};
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError(name, reader.line_no(), "missing header");
  const csv::Header h(line);
  try {
    std::array<std::size_t, kNumCovariates> cx{};
    for (std::size_t k = 0; k < kNumCovariates; ++k) cx[k] = h.require(std::string(kCovariateNames[k]));
    const auto c_id = h.require("player_id"), c_w = h.require("W"), c_dr = h.require("delta_report_rate"),
               c_dp = h.require("delta_participation"), c_off = h.require("offense_type"),
               c_sev = h.require("severity"), c_br = h.require("baseline_report_rate"),
               c_bp = h.require("baseline_participation"), c_lag = h.require("lag");
    while (reader.next(line)) {
      try {
        auto f = csv::split(line);
        if (f.size() != h.size()) throw std::invalid_argument("wrong field count");
        CohortRow r;
        r.player_id = std::string(f[c_id]);
        r.treated = static_cast<int>(csv::parse_long(f[c_w]));
        if (r.treated != 0 && r.treated != 1) throw std::invalid_argument("W must be 0 or 1");
        for (std::size_t k = 0; k < kNumCovariates; ++k) r.covariates[k] = csv::parse_double(f[cx[k]]);
        if (!f[c_dr].empty()) r.delta_report_rate = csv::parse_double(f[c_dr]);
        r.delta_participation = csv::parse_double(f[c_dp]);
        r.offense_type = parse_offense(f[c_off]);
        if (f[c_sev] != "Unclassifiable") r.severity = parse_severity(f[c_sev]);
        if (!f[c_br].empty()) r.baseline_report_rate = csv::parse_double(f[c_br]);
        r.baseline_participation = csv::parse_double(f[c_bp]);
        r.lag = static_cast<int>(csv::parse_long(f[c_lag]));
        table.rows.push_back(std::move(r));
      } catch (const std::exception& e) {
        throw ParseError(name, reader.line_no(), e.what());
      }
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(name, 1, e.what());
  }
  table.input_cases = static_cast<long>(table.rows.size());
  return table;
}

}  // namespace modcausal
