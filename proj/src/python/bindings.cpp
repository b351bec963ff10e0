#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <fstream>

#include "modcausal/report.hpp"
#include "modcausal/sim.hpp"

namespace py = pybind11;
using namespace modcausal;

namespace {

DateRange range_from(const std::optional<std::string>& from, const std::optional<std::string>& to) {
  DateRange r = default_study_range();
  if (from) r.start = parse_day(*from);
  if (to) r.end = parse_day(*to);
  return r;
}

Day voice_from(const std::optional<std::string>& v) { return v ? parse_day(*v) : default_voice_start(); }

py::dict row_dict(const EffectRow& r) {
  py::dict d;
  d["setup"] = r.setup;
  d["offense"] = r.offense;
  d["stratum"] = r.stratum;
  d["outcome"] = r.outcome;
  d["estimator"] = r.estimator;
  d["status"] = r.status;
  d["ate"] = r.ate;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  d["relative_effect"] = r.relative;
  d["relative_ci_low"] = r.relative_ci_low;
  d["relative_ci_high"] = r.relative_ci_high;
  d["n_treated"] = r.n_treated;
  d["n_control"] = r.n_control;
  d["note"] = r.note;
  return d;
}

py::dict simulate(const std::filesystem::path& out, std::optional<int> n_players, std::optional<std::uint64_t> seed,
                  const std::optional<std::string>& config) {
  KeyValueConfig kv;
  if (config) kv = KeyValueConfig::load(*config);
  auto cfg = sim_config_from(kv);
  if (n_players) cfg.n_players = *n_players;
  if (seed) cfg.seed = *seed;
  cfg.validate();
  SimWorld world;
  {
    py::gil_scoped_release release;
    world = generate_world(cfg);
  }
  std::filesystem::create_directories(out);
  write_event_log({out / "reports.csv", out / "moderations.csv", out / "matches.csv"}, world.tables);
  std::ofstream truth(out / "truth.csv", std::ios::binary);
  write_truth_csv(truth, world.truth);
  py::dict d;
  d["n_players"] = cfg.n_players;
  d["true_ate_report_rate"] = world.truth.true_ate_report_rate;
  d["true_ate_participation"] = world.truth.true_ate_participation;
  return d;
}

py::list link_files(const std::filesystem::path& reports, const std::filesystem::path& moderations,
              const std::filesystem::path& matches, const std::optional<std::string>& from,
              const std::optional<std::string>& to, const std::optional<std::string>& voice) {
  const auto raw = load_event_log({reports, moderations, matches}, range_from(from, to), voice_from(voice));
  py::list out;
  for (const auto& c : link_cases(raw)) {
    py::dict d;
    d["player_id"] = c.player_id;
    d["report_date"] = format_day(c.report_date);
    d["moderation_date"] = format_day(c.moderation_date);
    d["lag"] = c.lag;
    d["offense_type"] = std::string(to_string(c.offense_type));
    d["actions"] = c.actions.to_string();
    d["severity"] = c.severity ? py::cast(std::string(to_string(*c.severity))) : py::none();
    out.append(d);
  }
  return out;
}

py::list analyze(const std::filesystem::path& reports, const std::filesystem::path& moderations,
                 const std::filesystem::path& matches, std::uint64_t seed, const std::vector<std::string>& estimators,
                 const std::string& base, const std::optional<std::string>& effect, int reps, int threads,
                 const std::optional<std::filesystem::path>& out, const std::optional<std::string>& from,
                 const std::optional<std::string>& to, const std::optional<std::string>& voice) {
  PipelineOptions o;
  o.seed = seed;
  o.reps = reps;
  o.threads = threads;
  o.range = range_from(from, to);
  o.voice_start = voice_from(voice);
  o.estimators.clear();
  for (const auto& e : estimators) o.estimators.push_back(parse_estimator(e));
  auto spec = [](const std::string& s) {
    switch (parse_learner_kind(s)) {
      case LearnerKind::Linear: return LearnerSpec::linear();
      case LearnerKind::Constant: return LearnerSpec::constant();
      case LearnerKind::Gbt: break;
    }
    return LearnerSpec::gbt_default();
  };
  o.base = spec(base);
  if (effect) o.effect = spec(*effect);
  AnalysisReport report;
  {
    py::gil_scoped_release release;
    const auto raw = load_event_log({reports, moderations, matches}, o.range, o.voice_start);
    report = run_pipeline(raw, o);
    if (out) write_report_dir(out->string(), report);
  }
  py::list rows;
  for (const auto& r : effect_rows(report)) rows.append(row_dict(r));
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal estimates of moderation effects from report, moderation and match logs";

  m.def("simulate", &simulate, py::arg("out"), py::arg("n_players") = py::none(), py::arg("seed") = py::none(),
        py::arg("config") = py::none(),
        "Write a synthetic world (reports, moderations, matches, truth) into `out`; returns the true ATEs.");
  m.def("link_cases", &link_files, py::arg("reports"), py::arg("moderations"), py::arg("matches"),
        py::arg("start") = py::none(), py::arg("end") = py::none(), py::arg("voice_from") = py::none(),
        "Linked cases, one per moderated player.");
  m.def("analyze", &analyze, py::arg("reports"), py::arg("moderations"), py::arg("matches"), py::arg("seed"),
        py::arg("estimators") = std::vector<std::string>{"dr"}, py::arg("base") = "gbt",
        py::arg("effect_learner") = py::none(), py::arg("reps") = 500, py::arg("threads") = 1,
        py::arg("out") = py::none(), py::arg("start") = py::none(), py::arg("end") = py::none(),
        py::arg("voice_from") = py::none(), "Run the pipeline; returns the effect table rows as dicts.");

  m.def(
      "classify_severity",
      [](const std::string& offense, const std::vector<std::string>& actions) {
        ActionMultiset a;
        for (const auto& s : actions) a.add(parse_action(s));
        return std::string(to_string(classify_severity(parse_offense(offense), a)));
      },
      py::arg("offense"), py::arg("actions"));
  m.def("dr_ate", &dr_ate_formula, py::arg("w"), py::arg("y"), py::arg("e"), py::arg("mu1"), py::arg("mu0"),
        "Doubly robust (AIPW) average treatment effect from fixed nuisance estimates.");
  m.def("format_effect", &format_effect, py::arg("relative"), py::arg("ci_low"), py::arg("ci_high"),
        py::arg("level") = 0.95);

  py::register_exception<UnclassifiableActionSet>(m, "UnclassifiableActionSet", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
}
