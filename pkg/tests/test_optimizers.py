import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plhl import instance as I
from plhl.optimizers import (
    DIVERGENCE_FACTOR,
    CountingOracle,
    Method,
    OptimizerConfig,
    Status,
    run,
    run_agd,
    run_gd,
    run_heavy_ball,
    support_of,
)


def quad(weights):
    w = np.asarray(weights, dtype=float)
    return lambda x: (0.5 * float(np.sum(w * x * x)), w * x)


def config(method, L, mu, budget=10_000, target=1e-3, **kw):
    return OptimizerConfig(method, L, mu, budget, target, **kw)


def hard_run(method, T=2, t=20, budget=400, target=1e-3):
    inst = I.make_instance(I.chain_shape(T, t))
    oracle = CountingOracle(lambda x: I.hard_oracle(inst, x), inst.dim)
    cfg = config(method, inst.L, inst.mu_claimed, budget, target)
    return run(oracle, cfg, np.zeros(inst.dim)), oracle, inst


# ------------------------------------------------------------------ trivial quadratics


def test_gd_identity_quadratic_one_step():
    oracle = CountingOracle(quad([1, 1]), 2)
    tr = run_gd(oracle, config("gd", 1.0, 1.0), [1.0, 0.0])
    assert tr.status is Status.REACHED_TARGET
    np.testing.assert_array_equal(tr.value_gap, [0.5, 0.0])
    assert tr.queries_to_target(1e-3) == 1


def test_gd_scalar_quadratic():
    oracle = CountingOracle(quad([2.0]), 1)
    tr = run_gd(oracle, config("gd", 2.0, 2.0), [1.0])
    np.testing.assert_array_equal(tr.value_gap, [1.0, 0.0])
    assert oracle.query_count == 2


def test_agd_degenerate_momentum():
    cfg = config("agd", 1.0, 1.0)
    assert cfg.momentum == 0.0
    tr = run_agd(CountingOracle(quad([1, 1, 1]), 3), cfg, [0.3, -2.0, 5.0])
    assert tr.value_gap[1] == 0.0 and len(tr) == 2


def test_heavy_ball_degenerate_momentum():
    tr = run_heavy_ball(CountingOracle(quad([1, 1]), 2), config("hb", 1.0, 1.0), [4.0, -1.0])
    assert tr.value_gap[1] == 0.0 and len(tr) == 2


def queries_to_gap(method, gap=1e-8):
    f = quad([1.0, 100.0])
    gap0 = f(np.ones(2))[0]
    cfg = config(method, 100.0, 1.0, 10_000, gap / gap0)
    tr = run(CountingOracle(f, 2), cfg, [1.0, 1.0])
    assert tr.status is Status.REACHED_TARGET
    assert tr.value_gap[-1] <= gap * (1 + 1e-12)
    return tr.queries_to_target(gap / gap0)


def test_agd_beats_gd_on_ill_conditioned_quadratic():
    assert queries_to_gap("agd") < queries_to_gap("gd")


def test_heavy_ball_converges_on_quadratic():
    assert queries_to_gap("hb") <= 10_000


def test_gd_matches_closed_form_on_quadratic():
    tr = run_gd(CountingOracle(quad([1.0, 100.0]), 2), config("gd", 100.0, 1.0, 50, 1e-12), [1.0, 1.0])
    k = tr.query[1:]
    assert tr.value_gap[0] == 50.5
    np.testing.assert_allclose(tr.value_gap[1:], 0.5 * 0.99 ** (2 * k), rtol=1e-12)


# ------------------------------------------------------------------ config and support


def test_config_validation():
    with pytest.raises(ValueError):
        config("gd", 1.0, 2.0)
    with pytest.raises(ValueError):
        config("gd", 0.0, 0.0)
    with pytest.raises(ValueError):
        OptimizerConfig("gd", 1.0, 1.0, 0, 0.1)
    with pytest.raises(ValueError):
        OptimizerConfig("gd", 1.0, 1.0, 10, 1.0)
    with pytest.raises(ValueError):
        config("newton", 1.0, 1.0)
    with pytest.raises(ValueError):
        run_gd(CountingOracle(quad([1]), 1), config("agd", 1.0, 1.0), [1.0])
    with pytest.raises(ValueError):
        run_gd(CountingOracle(quad([1]), 1), config("gd", 1.0, 1.0), [1.0, 2.0])


def test_support_of_examples():
    assert support_of([0, 0, 0], 0) == set()
    assert support_of([1, 0, 3], 0) == {1, 3}
    assert support_of([1e-18, 1], 1e-12) == {2}
    with pytest.raises(ValueError):
        support_of([1.0], -1.0)


# ------------------------------------------------------------------ accounting and status


@pytest.mark.parametrize("method", list(Method))
def test_query_accounting(method):
    tr, oracle, _ = hard_run(method, budget=123, target=1e-9)
    assert len(tr) == oracle.query_count == 123
    assert tr.status is Status.BUDGET_EXHAUSTED
    np.testing.assert_array_equal(tr.query, np.arange(123))
    assert tr.rel_gap[0] == 1.0
    np.testing.assert_allclose(tr.rel_gap, tr.value_gap / tr.value_gap[0], rtol=1e-15)


@pytest.mark.parametrize("method", list(Method))
def test_zero_respecting_on_hard_instance(method):
    points, grads = [], []
    inst = I.make_instance(I.chain_shape(2, 20))
    oracle = CountingOracle(lambda x: I.hard_oracle(inst, x), inst.dim)
    cfg = config(method, inst.L, inst.mu_claimed, 200, 1e-9)

    def cb(x, v, g):
        points.append(x.copy())
        grads.append(g.copy())

    tr = run(oracle, cfg, np.zeros(inst.dim), callback=cb)
    assert tr.zero_respecting
    seen = set()
    for k, (x, g) in enumerate(zip(points, grads)):
        assert support_of(x) <= seen
        assert len(support_of(x)) <= k
        assert tr.support_size[k] == len(support_of(x))
        seen |= support_of(g)


def test_zero_respecting_flag_detects_violation():
    from plhl.optimizers import _Recorder

    rec = _Recorder(config("gd", 1.0, 1.0, 10, 1e-9), np.zeros(3), 0.0)
    rec.record(np.zeros(3), 1.0, np.array([1.0, 0.0, 0.0]))
    rec.record(np.array([0.5, 0.0, 0.0]), 0.9, np.array([0.0, 1.0, 0.0]))
    assert rec.trace().zero_respecting
    rec.record(np.array([0.5, 0.1, 0.2]), 0.8, np.zeros(3))
    assert not rec.trace().zero_respecting


def test_diverged_on_nonfinite():
    def fn(x):
        return (math.nan, x) if x[0] < 0.75 else (0.5 * float(x @ x), x)

    tr = run_gd(CountingOracle(fn, 1), config("gd", 2.0, 1.0, 100, 1e-9), [1.0])
    assert tr.status is Status.DIVERGED
    assert len(tr) == 2


def test_diverged_on_blowup():
    # step 1/L with L far too small for curvature 10: iterates grow by 9x per step
    oracle = CountingOracle(quad([10.0]), 1)
    tr = run_gd(oracle, config("gd", 1.0, 1.0, 1000, 1e-9), [1.0])
    assert tr.status is Status.DIVERGED
    assert tr.value_gap[-1] > DIVERGENCE_FACTOR * tr.value_gap[0]
    assert len(tr) == oracle.query_count


def test_heavy_ball_trace_recorded_on_hard_instance():
    tr, oracle, _ = hard_run(Method.HEAVY_BALL, budget=300)
    assert len(tr) == oracle.query_count > 0
    assert tr.status in set(Status)


@pytest.mark.parametrize("method", list(Method))
def test_determinism(method):
    a, _, _ = hard_run(method, budget=300)
    b, _, _ = hard_run(method, budget=300)
    for field in ("query", "value_gap", "rel_gap", "grad_norm", "support_size"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))


def test_sink_receives_every_record(monkeypatch):
    from plhl import optimizers

    monkeypatch.setattr(optimizers, "FLUSH_EVERY", 64)
    chunks = []
    inst = I.make_instance(I.chain_shape(2, 6))
    oracle = CountingOracle(lambda x: I.hard_oracle(inst, x), inst.dim)
    tr = run_gd(oracle, config("gd", inst.L, inst.mu_claimed, 200, 1e-12), np.zeros(inst.dim), sink=chunks.append)
    assert max(len(c) for c in chunks) <= 64
    np.testing.assert_array_equal(np.concatenate(chunks)[:, 2], tr.rel_gap)


def test_gd_contraction_on_hard_instance():
    tr, _, inst = hard_run(Method.GD, budget=20_000)
    assert tr.status is Status.REACHED_TARGET
    rate = 1 - inst.mu_claimed / inst.L
    assert np.all(tr.value_gap[1:] <= rate * tr.value_gap[:-1] + 1e-30)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.5, 50.0), min_size=1, max_size=5), st.integers(0, 2**31))
def test_property_gd_monotone_on_quadratics(weights, seed):
    w = np.asarray(weights)
    L, mu = float(w.max()), float(w.min())
    x0 = np.random.default_rng(seed).uniform(-3, 3, w.size)
    if not x0.any():
        return
    tr = run_gd(CountingOracle(quad(w), w.size), config("gd", L, mu, 200, 1e-12), x0)
    # L == mu steps land on 0 up to cancellation, so slack scales with the start gap
    slack = 1e-14 * tr.value_gap[0]
    assert np.all(np.diff(tr.value_gap) <= slack)
    assert np.all(tr.value_gap[1:] <= (1 - mu / L) * tr.value_gap[:-1] + slack)
