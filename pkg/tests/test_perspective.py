import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hellkan.entropies import EntropyFunction, mul0
from hellkan.perspective import (CLOSED, NUMERIC, perspective, perspective_closed,
                                 perspective_dual_check, perspective_numeric)

LOG = EntropyFunction.log()
TV = EntropyFunction.tv()
CASES = [
    ("log", None, LOG),
    ("reverse_log", None, EntropyFunction.power(0.0)),
    ("quadratic", None, EntropyFunction.power(2.0)),
    ("inverse_power", None, EntropyFunction.power(-1.0)),
    ("power", 0.5, EntropyFunction.power(0.5)),
    ("power", 3.0, EntropyFunction.power(3.0)),
    ("power", -0.5, EntropyFunction.power(-0.5)),
    ("tv", None, TV),
]
mass = st.floats(0.0, 5.0)
cost = st.floats(0.0, 6.0)


def test_log_zero_cost():
    assert perspective_numeric(LOG, LOG, 1.0, 1.0, 0.0).value == pytest.approx(0.0, abs=1e-12)


def test_log_example():
    expected = 5.0 - 2.0 * math.sqrt(2.0)
    assert perspective_numeric(LOG, LOG, 1.0, 4.0, math.log(2.0)).value == pytest.approx(
        expected, abs=1e-10)
    assert perspective(LOG, LOG, 1.0, 4.0, math.log(2.0)).value == pytest.approx(
        expected, abs=1e-14)


@pytest.mark.parametrize("e", [LOG, TV, EntropyFunction.power(0.5), EntropyFunction.power(2.0)],
                         ids=repr)
def test_infinite_cost(e):
    ev = perspective_numeric(e, e, 1.5, 0.5, math.inf)
    assert ev.value == pytest.approx(e.f_at_zero * 2.0)


def test_quadratic_example():
    assert perspective_closed("quadratic", 1.0, 1.0, 1.0).value == pytest.approx(0.75)


def test_tv_example():
    assert perspective_closed("tv", 2.0, 1.0, 1.0).value == 2.0


def test_log_infinite_cost_closed():
    assert perspective_closed("log", 1.0, 1.0, math.inf).value == 2.0


def test_unknown_family():
    with pytest.raises(ValueError):
        perspective_closed("nope", 1.0, 1.0, 1.0)


def test_method_dispatch():
    assert perspective(LOG, LOG, 1.0, 2.0, 0.3).method == CLOSED
    assert perspective(LOG, LOG, 1.0, 2.0, 0.3, method="numeric").method == NUMERIC
    mixed = perspective(LOG, TV, 1.0, 2.0, 0.3)
    assert mixed.method == NUMERIC
    with pytest.raises(ValueError):
        perspective(LOG, TV, 1.0, 2.0, 0.3, method="closed")
    with pytest.raises(ValueError):
        perspective(LOG, LOG, 1.0, 2.0, 0.3, method="magic")


@pytest.mark.parametrize("family, p, e", CASES, ids=[f"{c[0]}-{c[1]}" for c in CASES])
def test_closed_matches_numeric(family, p, e):
    rng = np.random.default_rng(abs(hash((family, p))) % 2**32)
    worst = 0.0
    for _ in range(1000):
        r1, r2 = rng.uniform(0.0, 3.0, 2)
        c = rng.uniform(0.0, 5.0)
        closed = perspective_closed(family, r1, r2, c, p).value
        numeric = perspective_numeric(e, e, r1, r2, c).value
        worst = max(worst, abs(closed - numeric) / (1.0 + abs(closed)))
    assert worst <= 1e-10


def test_log_pure_entropy_reduction():
    for r1, r2 in [(1.0, 4.0), (0.3, 2.2), (5.0, 0.0)]:
        ev = perspective_numeric(LOG, LOG, r1, r2, 0.0)
        assert ev.value == pytest.approx((math.sqrt(r1) - math.sqrt(r2)) ** 2, abs=1e-10)


@given(st.sampled_from(CASES), mass, mass, cost, st.floats(0.1, 10.0))
def test_homogeneity(case, r1, r2, c, lam):
    e = case[2]
    a = perspective(e, e, lam * r1, lam * r2, c).value
    b = lam * perspective(e, e, r1, r2, c).value
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(st.sampled_from(CASES), mass, mass, mass, mass, cost)
def test_midpoint_convexity(case, a1, a2, b1, b2, c):
    e = case[2]
    mid = perspective(e, e, 0.5 * (a1 + b1), 0.5 * (a2 + b2), c).value
    avg = 0.5 * (perspective(e, e, a1, a2, c).value + perspective(e, e, b1, b2, c).value)
    assert mid <= avg + 1e-10 * (1 + abs(avg))


@given(st.sampled_from(CASES), mass, mass, cost, cost)
def test_nondecreasing_in_cost(case, r1, r2, c1, c2):
    e = case[2]
    lo, hi = min(c1, c2), max(c1, c2)
    assert perspective(e, e, r1, r2, lo).value <= perspective(e, e, r1, r2, hi).value + 1e-12


@pytest.mark.parametrize("family, p, e", CASES, ids=[f"{c[0]}-{c[1]}" for c in CASES])
def test_concave_in_cost(family, p, e):
    c = np.linspace(0.0, 5.0, 51)
    v = np.array([perspective(e, e, 1.3, 0.6, x).value for x in c])
    assert np.all(np.diff(v, 2) <= 1e-9)


@given(st.sampled_from(CASES), mass, mass, cost)
def test_upper_bound_by_destruction(case, r1, r2, c):
    e = case[2]
    v = perspective(e, e, r1, r2, c).value
    assert 0.0 <= v + 1e-12
    assert v <= mul0(e.f_at_zero, r1 + r2) + 1e-12


def test_dual_check_examples():
    cert = perspective_dual_check(LOG, LOG, 1.0, 1.0, 0.0, 0.0)
    assert cert.lower_bound >= -1e-9 and cert.ok
    v = 5.0 - 2.0 * math.sqrt(2.0)
    cert = perspective_dual_check(LOG, LOG, 1.0, 4.0, math.log(2.0), v)
    assert cert.ok and abs(cert.lower_bound - v) <= 1e-4
    cert = perspective_dual_check(LOG, LOG, 1.0, 3.0, math.inf, 4.0)
    assert cert.lower_bound == 4.0 and cert.psi1 == 1.0 and cert.psi2 == 1.0


@pytest.mark.parametrize("family, p, e", CASES, ids=[f"{c[0]}-{c[1]}" for c in CASES])
def test_dual_check_families(family, p, e):
    rng = np.random.default_rng(7)
    for _ in range(5):
        r1, r2 = rng.uniform(0.1, 3.0, 2)
        c = rng.uniform(0.0, 4.0)
        v = perspective(e, e, r1, r2, c).value
        cert = perspective_dual_check(e, e, r1, r2, c, v)
        assert cert.ok
        assert v - cert.lower_bound <= 1e-4 * (1 + v)


def test_mixed_pair_dual_check():
    v = perspective(LOG, TV, 1.0, 2.0, 0.7).value
    cert = perspective_dual_check(LOG, TV, 1.0, 2.0, 0.7, v)
    assert cert.ok and v - cert.lower_bound <= 1e-4
