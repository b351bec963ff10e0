#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "modcausal/config.hpp"
#include "modcausal/ingestion.hpp"
#include "modcausal/report.hpp"
#include "modcausal/sim.hpp"

namespace fs = std::filesystem;
using namespace modcausal;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDegenerate = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputFlags {
  std::string reports, moderations, matches;
  std::string from, to, voice_from;
};

void add_input_flags(CLI::App* app, InputFlags& f) {
  app->add_option("--reports", f.reports, "Report events CSV");
  app->add_option("--moderations", f.moderations, "Moderation events CSV");
  app->add_option("--matches", f.matches, "Match-day records CSV");
  app->add_option("--from", f.from, "First day of the study range (YYYY-MM-DD)");
  app->add_option("--to", f.to, "Last day of the study range, inclusive");
  app->add_option("--voice-from", f.voice_from, "First day voice-chat reports are kept");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

DateRange resolve_range(const InputFlags& f, const KeyValueConfig& kv) {
  DateRange r = default_study_range();
  if (auto v = kv.get_string("from")) r.start = parse_day(*v);
  if (auto v = kv.get_string("to")) r.end = parse_day(*v);
  if (!f.from.empty()) r.start = parse_day(f.from);
  if (!f.to.empty()) r.end = parse_day(f.to);
  if (r.end < r.start) throw UsageError("--from is after --to");
  return r;
}

Day resolve_voice(const InputFlags& f, const KeyValueConfig& kv) {
  Day d = default_voice_start();
  if (auto v = kv.get_string("voice_from")) d = parse_day(*v);
  if (!f.voice_from.empty()) d = parse_day(f.voice_from);
  return d;
}

RawTables load_inputs(const InputFlags& f, const DateRange& range, Day voice) {
  if (f.reports.empty() || f.moderations.empty() || f.matches.empty())
    throw UsageError("--reports, --moderations and --matches are all required");
  return load_event_log({f.reports, f.moderations, f.matches}, range, voice);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

LearnerSpec learner_from(const std::string& name) {
  switch (parse_learner_kind(name)) {
    case LearnerKind::Linear: return LearnerSpec::linear();
    case LearnerKind::Gbt: return LearnerSpec::gbt_default();
    case LearnerKind::Constant: return LearnerSpec::constant();
  }
  throw UsageError("unknown learner " + name);
}

ClipBounds clip_from(const std::string& s) {
  const auto parts = split_list(s);
  ClipBounds c;
  if (parts.size() == 1) {
    c.lo = std::stod(parts[0]);
    c.hi = 1.0 - c.lo;
  } else if (parts.size() == 2) {
    c.lo = std::stod(parts[0]);
    c.hi = std::stod(parts[1]);
  } else {
    throw UsageError("--clip takes LO or LO,HI");
  }
  if (!(c.lo > 0.0 && c.lo < c.hi && c.hi < 1.0)) throw UsageError("--clip needs 0 < lo < hi < 1");
  return c;
}

// ---------------------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> players;
};

int cmd_simulate(const SimulateArgs& a) {
  KeyValueConfig kv;
  if (!a.config.empty()) kv = KeyValueConfig::load(a.config);
  auto cfg = sim_config_from(kv);
  if (a.seed) cfg.seed = *a.seed;
  if (a.players) cfg.n_players = *a.players;
  cfg.validate();
  const auto world = generate_world(cfg);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_event_log({out / "reports.csv", out / "moderations.csv", out / "matches.csv"}, world.tables);
  {
    auto f = open_out(out / "truth.csv");
    write_truth_csv(f, world.truth);
  }
  {
    auto f = open_out(out / "sim_config.txt");
    write_sim_config(f, cfg);
  }
  std::cout << "simulated " << cfg.n_players << " players: " << world.tables.reports.size() << " reports, "
            << world.tables.moderations.size() << " moderations, " << world.tables.match_days.size()
            << " match days; true ATE report rate " << world.truth.true_ate_report_rate << ", participation "
            << world.truth.true_ate_participation << '\n';
  return kOk;
}

struct IngestArgs {
  InputFlags in;
  std::string out;
};

int cmd_ingest(const IngestArgs& a) {
  const KeyValueConfig kv;
  const auto range = resolve_range(a.in, kv);
  const auto raw = load_inputs(a.in, range, resolve_voice(a.in, kv));
  raw.validate();
  const auto cases = link_cases(raw);
  const fs::path out(a.out);
  fs::create_directories(out);
  {
    auto f = open_out(out / "linked_cases.csv");
    write_linked_cases_csv(f, cases);
  }
  std::cout << "reports " << raw.reports.size() << ", moderations " << raw.moderations.size() << ", match days "
            << raw.match_days.size() << ", linked cases " << cases.size() << '\n';
  const EventLog log(raw, range);
  for (auto kind : {SetupKind::ModerationVsNone, SetupKind::QuickVsDelayed}) {
    try {
      const auto cohort = build_cohort(cases, StudySetup::from_kind(kind), log);
      auto f = open_out(out / ("cohort_" + std::string(to_string(kind)) + ".csv"));
      write_cohort_csv(f, cohort);
      std::cout << to_string(kind) << ": " << cohort.rows.size() << " rows (treated " << cohort.n_treated()
                << ", control " << cohort.n_control() << ")";
      for (const auto& [k, v] : cohort.exclusion_counts) std::cout << ", " << k << ' ' << v;
      for (const auto& [k, v] : cohort.outcome_exclusions) std::cout << ", " << k << ' ' << v;
      std::cout << '\n';
    } catch (const CohortDegenerate& e) {
      std::cout << to_string(kind) << ": degenerate (" << e.what() << ")\n";
    }
  }
  return kOk;
}

struct AnalyzeArgs {
  InputFlags in;
  std::string config, out, estimator, base, effect, clip, sim_config;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps, threads;
  bool simulate = false;
};

PipelineOptions pipeline_options(const AnalyzeArgs& a, const KeyValueConfig& kv) {
  PipelineOptions o;
  if (!a.seed) throw UsageError("analyze requires --seed");
  o.seed = *a.seed;
  o.range = resolve_range(a.in, kv);
  o.voice_start = resolve_voice(a.in, kv);

  auto str = [&](const std::string& flag, const char* key) -> std::optional<std::string> {
    if (!flag.empty()) return flag;
    return kv.get_string(key);
  };
  if (auto v = str(a.estimator, "estimator")) {
    o.estimators.clear();
    if (*v == "all") {
      o.estimators.assign(kAllEstimators.begin(), kAllEstimators.end());
    } else {
      for (const auto& s : split_list(*v)) o.estimators.push_back(parse_estimator(s));
    }
    if (o.estimators.empty()) throw UsageError("--estimator is empty");
  }
  if (auto v = str(a.base, "base")) o.base = learner_from(*v);
  if (auto v = str(a.effect, "effect_learner"); v && *v != "auto") o.effect = learner_from(*v);
  if (auto v = str(a.clip, "clip")) o.clip = clip_from(*v);
  if (auto v = kv.get_int("reps")) o.reps = static_cast<int>(*v);
  if (a.reps) o.reps = *a.reps;
  if (auto v = kv.get_int("threads")) o.threads = static_cast<int>(*v);
  if (a.threads) o.threads = *a.threads;
  if (auto v = kv.get_double("level")) o.level = *v;
  if (auto v = kv.get_int("match_k")) o.match_k = static_cast<int>(*v);
  if (auto v = kv.get_int("min_arm_size")) o.min_arm_size = *v;
  if (auto v = kv.get_bool("dr_cross_fit")) o.dr_cross_fit = *v;
  if (auto v = kv.get_string("setups")) {
    o.setups.clear();
    for (const auto& s : split_list(*v)) o.setups.push_back(parse_setup(s));
  }
  if (auto v = kv.get_string("outcomes")) {
    o.outcomes.clear();
    for (const auto& s : split_list(*v)) o.outcomes.push_back(parse_outcome(s));
  }
  kv.get_string("seed");  // accepted so an echoed config loads; only --seed is used
  if (auto unused = kv.unused_keys(); !unused.empty()) throw UsageError("unknown config key '" + unused.front() + "'");
  if (o.reps < 100) throw UsageError("--reps must be at least 100");
  if (o.threads < 1) throw UsageError("--threads must be at least 1");
  return o;
}

int cmd_analyze(const AnalyzeArgs& a) {
  KeyValueConfig kv;
  if (!a.config.empty()) kv = KeyValueConfig::load(a.config);
  PipelineOptions opts;
  try {
    opts = pipeline_options(a, kv);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  RawTables raw;
  if (a.simulate) {
    KeyValueConfig skv;
    if (!a.sim_config.empty()) skv = KeyValueConfig::load(a.sim_config);
    auto sc = sim_config_from(skv);
    sc.seed = derive_seed(opts.seed, 0x51);
    raw = generate_world(sc).tables;
    opts.extra_echo.push_back({"input", "simulated"});
    opts.extra_echo.push_back({"sim_config", a.sim_config.empty() ? "defaults" : a.sim_config});
  } else {
    raw = load_inputs(a.in, opts.range, opts.voice_start);
    opts.extra_echo.push_back({"reports", a.in.reports});
    opts.extra_echo.push_back({"moderations", a.in.moderations});
    opts.extra_echo.push_back({"matches", a.in.matches});
  }
  if (!a.config.empty()) opts.extra_echo.push_back({"config", a.config});
  const auto report = run_pipeline(raw, opts);
  write_report_dir(a.out, report);
  render_effect_table(std::cout, effect_rows(report));
  return report.all_degenerate() ? kDegenerate : kOk;
}

struct ReportArgs {
  std::string in;
  std::string format = "text";
};

int cmd_report(const ReportArgs& a) {
  fs::path p(a.in);
  if (fs::is_directory(p)) p /= "report.csv";
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  const auto rows = read_effect_csv(f, p.string());
  if (a.format == "csv") {
    render_effect_csv(std::cout, rows);
  } else {
    render_effect_table(std::cout, rows);
  }
  return kOk;
}

struct SelftestArgs {
  std::vector<int> criteria;
  int threads = 1;
};

int cmd_selftest(const SelftestArgs& a) {
  auto ids = a.criteria;
  if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  acceptance::Options opts;
  opts.threads = a.threads;
  const auto results = acceptance::run_all(opts, ids, [](const acceptance::Result& r) {
    std::cout << acceptance::format_line(r) << std::endl;
  });
  for (const auto& r : results)
    if (!r.pass) return kData;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal analysis of moderation effects from report, moderation and match logs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic world with known effects");
  s->add_option("--config", sim.config, "Simulation config file (key = value)");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Overrides the config seed");
  s->add_option("--players", sim.players, "Overrides the config player count");

  IngestArgs ing;
  auto* i = app.add_subcommand("ingest", "Load and link event logs; export linked cases and cohorts");
  add_input_flags(i, ing.in);
  i->add_option("--out", ing.out, "Output directory")->required();

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Run the full estimation pipeline and write the report");
  add_input_flags(a, an.in);
  a->add_option("--config", an.config, "Analysis config file (key = value)");
  a->add_option("--out", an.out, "Output directory")->required();
  a->add_option("--seed", an.seed, "Master seed for all randomness (required)");
  a->add_option("--estimator", an.estimator, "Comma list of t,s,x,r,dr or 'all' (default dr)");
  a->add_option("--base", an.base, "Outcome learner: gbt, linear or constant (default gbt)");
  a->add_option("--effect-learner", an.effect, "Second-stage learner: gbt, linear or auto");
  a->add_option("--clip", an.clip, "Propensity clip LO or LO,HI (default 0.01)");
  a->add_option("--reps", an.reps, "Bootstrap replicates (default 500)");
  a->add_option("--threads", an.threads, "Worker threads for bootstrap replicates");
  a->add_flag("--simulate", an.simulate, "Analyse a simulated world instead of input files");
  a->add_option("--sim-config", an.sim_config, "Simulation config used with --simulate");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Render the effect table from a report directory or report.csv");
  r->add_option("--in", rep.in, "Report directory or report.csv")->required();
  r->add_option("--format", rep.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  SelftestArgs st;
  auto* t = app.add_subcommand("selftest", "Run the acceptance suite against the simulator oracle");
  t->add_option("--criteria", st.criteria, "Criterion numbers to run (default all)")->delimiter(',');
  t->add_option("--threads", st.threads, "Worker threads for bootstrap replicates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*i) return cmd_ingest(ing);
    if (*a) return cmd_analyze(an);
    if (*r) return cmd_report(rep);
    if (*t) return cmd_selftest(st);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
