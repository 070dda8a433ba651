import numpy as np
import pytest

from plhl import instance as I

CI_SHAPES = [(2, 6), (2, 20), (3, 10)]


def q_reference(T, t, x):
    """Block-chained quadratic written out term by term with x_0 = 0."""
    xs = [0.0] + [float(v) for v in x]
    total = 0.0
    for i in range(t):
        total += (7.0 / 8.0 * xs[i * T] - xs[i * T + 1]) ** 2
        for j in range(1, T):
            total += (xs[i * T + j + 1] - xs[i * T + j]) ** 2
    return 0.5 * total


def v_reference(y, x):
    if x <= 31 * y / 32:
        return 0.5 * x * x
    if x <= y:
        return 0.5 * x * x - 16 * (x - 31 * y / 32) ** 2
    if x <= 33 * y / 32:
        return 0.5 * x * x - y * y / 32 + 16 * (x - 33 * y / 32) ** 2
    return 0.5 * x * x - y * y / 32


def g_reference(T, t, x):
    y = [(7.0 / 8.0) ** (k // T) for k in range(T * t)]
    return q_reference(T, t, x) + sum(v_reference(yi, xi) for yi, xi in zip(y, x))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(params=CI_SHAPES, ids=lambda s: f"T{s[0]}t{s[1]}")
def ci_shape(request):
    return I.chain_shape(*request.param)
