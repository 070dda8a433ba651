import json
from fractions import Fraction
import re

import numpy as np
import pytest

from plhl import experiments as E
from plhl import instance as I
from plhl.optimizers import Method, Status
from plhl.plot import downsample, emit_plot, render_svg


@pytest.fixture(scope="module")
def ci_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("ci")
    cfg = E.ExperimentConfig(epsilon=1e-3, T=2, t=20, max_queries=10_000, output_dir=out)
    return E.run_suite(cfg)


def test_ci_run_statuses(ci_report):
    assert set(ci_report.methods) == {"gd", "agd", "hb"}
    gd = ci_report.methods["gd"]
    assert gd["status"] == "ReachedTarget"
    a = ci_report.audit
    assert a["floor_kmin"] <= gd["queries_to_target"] <= a["gd_ceiling"]
    assert a["half_chain"] == 20


def test_csv_files(ci_report):
    out = ci_report.summary_path.parent
    for name, info in ci_report.methods.items():
        lines = (out / info["csv"]).read_text().splitlines()
        assert lines[0] == "query,value_gap,rel_gap,grad_norm,support_size"
        assert len(lines) - 1 == min(10_000, info["queries"]) == len(ci_report.traces[Method(name)])
        first = lines[1].split(",")
        assert first[0] == "0" and float(first[2]) == 1.0


def test_summary_json_keys(ci_report):
    data = json.loads(ci_report.summary_path.read_text())
    assert set(data) == {"params", "constants", "methods", "audit"}
    for key in ("T", "t", "dim", "L", "D", "mu_claimed", "kappa", "epsilon", "seed"):
        assert key in data["params"]
    assert data["constants"]["C3"] == pytest.approx(21344400 / 1083)
    assert data["constants"]["C4"] == pytest.approx(370 * 21344400 / 1083)
    assert Fraction(data["constants"]["C3_fraction"]) == Fraction(21344400, 1083)
    for key in ("floor_kmin", "half_chain", "relgap_at_half_chain", "gd_ceiling"):
        assert key in data["audit"]
    for info in data["methods"].values():
        assert {"status", "queries_to_target", "csv"} <= set(info)


def test_reload_matches(ci_report):
    loaded = E.RunReport.load(ci_report.summary_path)
    for m, tr in ci_report.traces.items():
        np.testing.assert_array_equal(loaded.traces[m].rel_gap, tr.rel_gap)
        assert loaded.traces[m].status is tr.status
    assert E.lower_bound_audit(loaded) == E.lower_bound_audit(ci_report)


def test_reproducible_bytes(ci_report, tmp_path):
    cfg = E.ExperimentConfig(epsilon=1e-3, T=2, t=20, max_queries=10_000, output_dir=tmp_path)
    again = E.run_suite(cfg)
    for info in again.methods.values():
        a = (tmp_path / info["csv"]).read_bytes()
        b = (ci_report.summary_path.parent / info["csv"]).read_bytes()
        assert a == b


def test_audit_verdicts(ci_report):
    verdict = E.lower_bound_audit(ci_report)
    assert E.audit_passed(verdict)
    assert verdict["gd"]["below_ceiling"] and verdict["gd"]["above_floor"]
    assert verdict["gd"]["half_chain_gap_above_eps"]
    text = E.format_audit(ci_report, verdict)
    assert "sandwich" in text and "gd:" in text


def test_gd_tail_linearity(ci_report):
    assert E.tail_linearity(ci_report.traces[Method.GD]) >= 0.95


def test_budget_honesty(tmp_path):
    cfg = E.ExperimentConfig(epsilon=1e-10, kappa=1.9709e6, methods=("gd",), max_queries=350, output_dir=tmp_path)
    report = E.run_suite(cfg)
    assert report.params["T"] == 2 and report.params["t"] == 350
    assert report.methods["gd"]["status"] == "BudgetExhausted"
    assert report.methods["gd"]["queries"] == 350
    assert len((tmp_path / "trace_gd.csv").read_text().splitlines()) == 351
    assert report.traces[Method.GD].rel_gap[-1] > 1e-10


def test_absolute_stop_mode(tmp_path):
    cfg = E.ExperimentConfig(epsilon=1e-4, T=2, t=6, delta=0.01, stop="absolute", methods=("gd",),
                             output_dir=tmp_path)
    report = E.run_suite(cfg)
    assert report.params["gap0"] == pytest.approx(0.01, rel=1e-12)
    assert report.params["target_relgap"] == pytest.approx(1e-2, rel=1e-12)
    tr = report.traces[Method.GD]
    assert tr.status is Status.REACHED_TARGET and tr.value_gap[-1] <= 1e-4


def test_config_validation():
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=1e-3)
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=1e-3, T=2)
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=0.05, kappa=1e7)
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=1e-3, T=2, t=3, stop="absolute")
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=1.0, T=2, t=3, delta=1.0, stop="absolute")
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig(epsilon=1e-3, T=2, t=3, methods=())
    with pytest.raises(ValueError):
        E.ExperimentConfig(epsilon=1e-3, T=2, t=3, methods=("sgd",))


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# CI\nT = 2\nt = 20\nepsilon = 1e-3  # target\nmethods = gd,hb\nmax_queries = 1e4\n")
    values = E.read_config(p)
    assert values == {"T": 2, "t": 20, "epsilon": 1e-3, "methods": "gd,hb", "max_queries": 10000}
    cfg = E.config_from_values(values)
    assert cfg.methods == (Method.GD, Method.HEAVY_BALL)
    p.write_text("colour = red\n")
    with pytest.raises(E.ConfigError, match="unknown key"):
        E.read_config(p)
    p.write_text("T 2\n")
    with pytest.raises(E.ConfigError):
        E.read_config(p)
    p.write_text("T = two\n")
    with pytest.raises(E.ConfigError):
        E.read_config(p)
    with pytest.raises(E.ConfigError):
        E.read_config(tmp_path / "missing.cfg")


def test_worker_threads(monkeypatch):
    monkeypatch.setenv("PLHL_THREADS", "2")
    assert E.worker_threads() == 2
    monkeypatch.delenv("PLHL_THREADS")
    assert E.worker_threads() >= 1


# ------------------------------------------------------------------ plot


def test_downsample():
    q = np.arange(10_001)
    dq, dr = downsample(q, q * 1.0)
    assert len(dq) <= 4001 and dq[-1] == 10_000
    assert np.all(np.diff(dq[:-1]) == 3)
    small, _ = downsample(np.arange(10), np.ones(10))
    assert len(small) == 10


def test_svg_three_curves(ci_report):
    svg = emit_plot(ci_report).read_text()
    assert svg.startswith("<svg")
    assert len(re.findall(r'<polyline class="curve"', svg)) == 3
    assert len(re.findall(r'class="marker"', svg)) == 2
    legend = re.findall(r'class="legend"[^>]*>([^<]+)<', svg)
    assert legend == ["GD", "AGD", "Heavy-ball"]
    for poly in re.findall(r'points="([^"]+)"', svg):
        assert len(poly.split()) <= 4001


def test_svg_gd_only(tmp_path):
    cfg = E.ExperimentConfig(epsilon=1e-3, T=2, t=6, methods=("gd",), output_dir=tmp_path)
    svg = emit_plot(E.run_suite(cfg)).read_text()
    assert svg.count('class="curve"') == 1
    assert svg.count('class="marker"') == 2


def test_svg_skips_empty_curve():
    svg = render_svg({"gd": (np.arange(3), np.array([1.0, 0.1, 0.01])),
                      "hb": (np.arange(2), np.array([0.0, 0.0]))}, {"m": 1})
    assert svg.count('class="curve"') == 1
