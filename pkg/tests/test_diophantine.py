import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from badflow.diophantine import (badness_constant_direct, build_curated, certified_floor,
                                 correspondence_check, dirichlet_witness, dual_only_zero_solution,
                                 liouville, load_curated, orbit_trace, parse_real)
from badflow.errors import ResourceError
from badflow.flows import Weight

W1 = Weight([1.0])
W2 = Weight([0.5, 0.5])
GOLDEN = "(sqrt(5)-1)/2"


def brute_direct(xs, r, Q):
    """Float64-free oracle: mpmath at 60 digits, q by q."""
    with mpmath.workdps(60):
        xm = [mpmath.mpf(parse_real(v)) if not isinstance(parse_real(v), Fraction)
              else mpmath.mpf(parse_real(v).numerator) / parse_real(v).denominator for v in xs]
        best = mpmath.inf
        for q in range(1, Q + 1):
            val = max(mpmath.mpf(q) ** ri * abs(q * x - mpmath.nint(q * x)) for x, ri in zip(xm, r))
            best = min(best, val)
        return float(best)


# parsing ------------------------------------------------------------------------

def test_parse_real():
    assert parse_real("3/7") == Fraction(3, 7)
    assert parse_real("0.618034") == Fraction(618034, 10 ** 6)
    assert parse_real(0.5) == Fraction(1, 2)
    assert parse_real(3) == Fraction(3)
    assert parse_real("liouville(3)") == liouville(3) == Fraction(1, 10) + Fraction(1, 100) + Fraction(1, 10 ** 6)
    with mpmath.workdps(50):
        assert abs(parse_real("sqrt(2)") - mpmath.sqrt(2)) < mpmath.mpf(10) ** -45
        assert abs(parse_real("cbrt(2)") ** 3 - 2) < mpmath.mpf(10) ** -45
    for bad in ("import os", "x + 1", "sqrt(", "__import__('os')", float("nan")):
        with pytest.raises((ValueError, TypeError)):
            parse_real(bad)


# Dirichlet ------------------------------------------------------------------------

def test_dirichlet_examples():
    assert dirichlet_witness("0", W1, 10) == (0, 1)
    assert dirichlet_witness(GOLDEN, W1, 5) == (-3, 5)
    assert dirichlet_witness("1/2", W1, 2) == (-1, 2)
    with pytest.raises(ValueError):
        dirichlet_witness(GOLDEN, W1, 1)


@pytest.mark.parametrize("N", [10, 100])
def test_dirichlet_random(rng, N):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        r = rng.dirichlet(np.ones(n))
        r[-1] = 1 - r[:-1].sum()
        w = Weight(sorted(r.tolist(), reverse=True))
        x = rng.uniform(-2, 2, n)
        p = dirichlet_witness(x.tolist(), w, N)
        q = p[-1]
        assert 0 < q <= N
        for i in range(n):
            err = abs(q * Fraction(float(x[i])) + p[i])
            assert float(err) <= N ** -w.r[i] * (1 + 1e-12)


# direct test -----------------------------------------------------------------------

def test_direct_examples():
    assert badness_constant_direct("3/7", W1, 7).constant == 0
    assert badness_constant_direct("3/7", W1, 6).constant > 0
    rep = badness_constant_direct(GOLDEN, W1, 1000)
    assert rep.constant == pytest.approx(brute_direct([GOLDEN], [1.0], 1000), rel=1e-12)
    assert rep.horizon == 1000
    p, q = rep.witness
    x = (math.sqrt(5) - 1) / 2
    assert q * abs(q * x + p) == pytest.approx(rep.constant, rel=1e-12)
    assert badness_constant_direct(["1/3", "2/5"], W2, 15).constant == 0
    with pytest.raises(ValueError):
        badness_constant_direct(GOLDEN, W1, 0)
    with pytest.raises(ValueError):
        badness_constant_direct(GOLDEN, W2, 10)


def test_direct_against_mpmath_oracle(rng):
    for _ in range(6):
        n = int(rng.integers(1, 3))
        w = W1 if n == 1 else Weight([0.7, 0.3])
        x = [f"sqrt({int(k)})" for k in rng.choice([2, 3, 5, 6, 7, 10, 11], n, replace=False)]
        got = badness_constant_direct(x, w, 400).constant
        assert got == pytest.approx(brute_direct(x, w.r, 400), rel=1e-12)


def test_direct_liouville():
    assert badness_constant_direct("liouville(5)", W1, 10 ** 7).constant <= 1e-5


@given(st.integers(1, 3000), st.integers(1, 3000), st.sampled_from([GOLDEN, "sqrt(7)", "pi", "13/1999"]))
def test_direct_monotone_in_Q(Q1, Q2, x):
    lo, hi = sorted((Q1, Q2))
    assert badness_constant_direct(x, W1, hi).constant <= badness_constant_direct(x, W1, lo).constant


# dual test -----------------------------------------------------------------------------

def test_dual_examples():
    assert dual_only_zero_solution(GOLDEN, W1, 0.2, 10)
    assert not dual_only_zero_solution("1/2", W1, 0.1, 3)
    assert not dual_only_zero_solution(["1/2", "sqrt(2)"], Weight([1.0 - 1e-9, 1e-9]), 0.1, 3)
    assert dual_only_zero_solution(GOLDEN, W1, 1e-6, 10)
    assert not dual_only_zero_solution(GOLDEN, W1, 2.0, 1)   # a_0 = 1 alone
    with pytest.raises(ResourceError):
        dual_only_zero_solution(["sqrt(2)", "sqrt(3)"], W2, 0.1, 1e8, cap=1000)


def test_dual_against_scan():
    x = (math.sqrt(5) - 1) / 2
    m = min(abs(a * x - round(a * x)) for a in range(1, 10))
    assert m == pytest.approx(0.0557, abs=1e-4)
    assert dual_only_zero_solution(GOLDEN, W1, 10 * m * 0.999, 10)
    assert not dual_only_zero_solution(GOLDEN, W1, 10 * m * 1.001, 10)


@given(st.floats(0.001, 0.9), st.floats(0.001, 0.9), st.integers(1, 60), st.integers(1, 60),
       st.sampled_from([[GOLDEN], ["sqrt(2)", "sqrt(3)"], ["1/3", "liouville(3)"]]))
def test_dual_antitone(c1, c2, N1, N2, x):
    w = W1 if len(x) == 1 else W2
    clo, chi = sorted((c1, c2))
    Nlo, Nhi = sorted((N1, N2))
    if dual_only_zero_solution(x, w, chi, Nhi):
        assert dual_only_zero_solution(x, w, clo, Nhi)
        assert dual_only_zero_solution(x, w, chi, Nlo)


# orbits -----------------------------------------------------------------------------------

def test_orbit_zero_closed_form():
    tr = orbit_trace("0", W1, T=5, step=0.05)
    assert np.allclose(tr.lambda1, np.minimum(1, np.exp(-tr.times)), rtol=1e-12)
    tr2 = orbit_trace(["0", "0"], W2, convention="d_U", T=3, step=0.1)
    assert np.allclose(tr2.lambda1, np.exp(-0.5 * tr2.times), rtol=1e-12)


def test_orbit_validation():
    for kw in ({"T": 0}, {"step": 0.2}, {"step": 0}, {"convention": "x"}):
        with pytest.raises(ValueError):
            orbit_trace(GOLDEN, W1, **{"T": 1.0, **kw})


def test_orbit_golden_floor():
    tr = orbit_trace(GOLDEN, W1, T=30, step=0.01)
    assert tr.certified_floor >= 0.4
    assert tr.certified_floor <= tr.lambda1.min()
    assert np.all(np.diff(tr.times) > 0)


def test_orbit_witness_realises_norm():
    tr = orbit_trace(GOLDEN, W1, T=4, step=0.1)
    x = (math.sqrt(5) - 1) / 2
    for t, lam, (a, b) in zip(tr.times, tr.lambda1, tr.witnesses):
        v = np.array([math.exp(t) * (a + x * b), math.exp(-t) * b])
        assert np.max(np.abs(v)) == pytest.approx(lam, rel=1e-9)


def test_orbit_liouville_dip():
    assert orbit_trace("liouville(5)", W1, T=30, step=0.01).lambda1.min() <= 1e-4


@pytest.mark.parametrize("x,w", [(GOLDEN, W1), ("sqrt(2)", W1), (["sqrt(2)", "sqrt(3)"], W2),
                                 ("liouville(3)", W1)])
def test_certified_floor_is_lower_bound(x, w):
    coarse = orbit_trace(x, w, T=6, step=0.1)
    fine = orbit_trace(x, w, T=6, step=0.01)
    assert fine.lambda1.min() >= coarse.certified_floor * (1 - 1e-12)


def test_certified_floor_formula():
    t = np.array([0.0, 0.5, 1.0])
    lam = np.array([1.0, 0.5, 0.8])
    assert certified_floor(t, lam, 1.0) == pytest.approx(0.5 * math.exp(-0.5))


# correspondence ------------------------------------------------------------------------------

def test_correspondence_examples():
    g = correspondence_check(GOLDEN, W1, 1000)
    assert g.verdict == "consistent"
    assert g.direct_class == g.orbit_class == "bad at this scale"
    lv = correspondence_check("liouville(4)", W1, 10 ** 6)
    assert lv.verdict == "consistent"
    assert lv.direct_class == lv.orbit_class == "not bad at this scale"
    z = correspondence_check("0", W1, 100)
    assert z.direct_constant == 0 and z.verdict == "consistent"


# curated set ---------------------------------------------------------------------------------

def test_curated_agreement():
    data = load_curated()
    assert len(data["samples"]) >= 10
    for s in data["samples"]:
        assert s["direct_class"] == s["dual_class"], s["name"]
    kinds = {s["direct_class"] for s in data["samples"]}
    assert kinds == {"bad at this scale", "not bad at this scale"}


@pytest.mark.slow
def test_curated_file_matches_rebuild():
    assert build_curated() == load_curated()
