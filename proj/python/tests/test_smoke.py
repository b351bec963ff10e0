import csv

import numpy as np
import pytest

import modcausal


def test_format_effect():
    assert modcausal.format_effect(-50.0, -60.0, -40.0) == "-50.00% (95% CI: -60.00%, -40.00%)"


def test_classify_severity():
    assert modcausal.classify_severity("OffensiveTextChat", ["PenaltyNotice", "FeatureFlag"]) == "Stricter"
    assert modcausal.classify_severity("Cheating", ["RemoveFromLeaderboard"]) == "NotApplicable"
    with pytest.raises(ValueError):
        modcausal.classify_severity("OffensiveVoiceChat", ["WarningNotice"])


def test_dr_ate_two_rows():
    w = np.array([1.0, 0.0])
    y = np.array([1.0, 0.0])
    e = np.full(2, 0.5)
    assert modcausal.dr_ate(w, y, e, np.zeros(2), np.zeros(2)) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    truth = modcausal.simulate(out, n_players=1500, seed=4)
    return out, truth


def test_simulate_writes_tables(world):
    out, truth = world
    for name in ("reports.csv", "moderations.csv", "matches.csv", "truth.csv"):
        assert (out / name).stat().st_size > 0
    assert truth["true_ate_report_rate"] == pytest.approx(-0.3)


def test_link_cases(world):
    out, _ = world
    cases = modcausal.link_cases(out / "reports.csv", out / "moderations.csv", out / "matches.csv")
    assert len(cases) == 1500
    assert all(0 <= c["lag"] <= 14 for c in cases)


def test_analyze_recovers_effect(world, tmp_path):
    out, truth = world
    rows = modcausal.analyze(
        out / "reports.csv", out / "moderations.csv", out / "matches.csv",
        seed=7, base="linear", effect_learner="linear", reps=100, out=tmp_path,
    )
    pooled = [r for r in rows if r["setup"] == "QuickVsDelayed" and r["stratum"] == "pooled"
              and r["outcome"] == "delta_report_rate" and r["status"] == "ok"]
    assert pooled
    for r in pooled:
        assert float(r["ci_low"]) <= float(r["ate"]) <= float(r["ci_high"])
    assert abs(np.mean([float(r["ate"]) for r in pooled]) - truth["true_ate_report_rate"]) < 0.1
    with open(tmp_path / "report.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == len(rows)
