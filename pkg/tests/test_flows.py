import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badflow.flows import (FlowParams, Weight, aux_flow, conjugate_unipotent_by_flow, flow_a,
                           flow_d, flow_g, g_eta, g_prime, rotation_frame, unipotent_U,
                           unipotent_V, xi_flow)


def random_weight(rng, n):
    r = np.sort(rng.dirichlet(np.ones(n)))[::-1]
    r[-1] = 1.0 - math.fsum(r[:-1])
    return Weight(r)


def test_weight_validation():
    with pytest.raises(ValueError):
        Weight([0.5, 0.4])
    with pytest.raises(ValueError):
        Weight([1.2, -0.2])
    assert not Weight([0.3, 0.7]).is_standard()
    with pytest.raises(ValueError):
        Weight([0.3, 0.7]).require_standard()
    assert Weight([0.7, 0.3]).is_standard()


def test_flow_params_invariants():
    w = Weight([2 / 3, 1 / 3])
    p = FlowParams(100, 2, w)
    assert p.b == pytest.approx(100 ** 0.6, rel=1e-12)
    assert p.b ** (1 + w.r[0]) == pytest.approx(100, rel=1e-12)
    assert p.kappa == 1e-4
    assert p.lam[0] == 1.0 and p.lam[1] == pytest.approx((4 / 3) / (5 / 3))
    for bad in ((1, 1), (2.5, 1), (4, 0)):
        with pytest.raises(ValueError):
            FlowParams(bad[0], bad[1], w)


def test_flow_examples():
    w = Weight([0.5, 0.5])
    assert np.allclose(flow_a(w, 0.0), np.eye(3))
    assert np.allclose(flow_a(w, math.log(4)), np.diag([2, 2, 0.25]), rtol=1e-14)
    w2 = Weight([2 / 3, 1 / 3])
    assert np.allclose(flow_d(w2, 0.0), np.eye(3))
    assert np.allclose(flow_d(w2, math.log(8)), np.diag([8, 0.25, 0.5]), rtol=1e-13)
    p = FlowParams(100, 1, w2)
    assert np.allclose(flow_g(p, w2, 0), np.eye(3))
    assert flow_g(p, w2, 1)[0, 0] == pytest.approx(15.84893, rel=1e-6)


def test_flows_determinant_and_group_law(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        w = random_weight(rng, n)
        t, s = rng.uniform(-20, 20, 2)
        p = FlowParams(int(rng.integers(2, 50)), 1, w)
        for f in (lambda u: flow_a(w, u), lambda u: flow_d(w, u), lambda u: flow_g(p, w, u)):
            assert np.linalg.det(f(t)) == pytest.approx(1.0, rel=1e-9)
            assert np.allclose(f(t) @ f(s), f(t + s), rtol=1e-9, atol=0)
        assert np.allclose(flow_d(w, t) @ flow_d(w, -t), np.eye(n + 1), atol=1e-12)


def test_aux_flows():
    b = 16 ** (1 / 1.5)
    assert np.allclose(aux_flow([0, 0, 0], 3.0, b), np.eye(3))
    assert np.allclose(np.diag(g_eta(2, 1 / 400, 1.0, b)),
                       [b ** (-1 / 400), b ** (1 / 800), b ** (1 / 800)], rtol=1e-14)
    with pytest.raises(ValueError):
        aux_flow([1, 0, 0], 1.0, b)


def test_xi_and_g_prime_presets(rng):
    for _ in range(50):
        n = int(rng.integers(2, 6))
        w = random_weight(rng, n)
        n1 = int(rng.integers(2, n + 1))
        t = float(rng.uniform(-3, 3))
        b = float(rng.uniform(1.5, 20))
        X = xi_flow(w, n1, t, b)
        assert np.linalg.det(X) == pytest.approx(1.0, rel=1e-9)
        assert np.linalg.det(g_prime(w, n1, t, b)) == pytest.approx(1.0, rel=1e-9)
        # g'(t) = xi(t) g_r(t) in base b
        g = np.diag(b ** (t * np.array([1.0] + [-x for x in w.r])))
        assert np.allclose(g_prime(w, n1, t, b), X @ g, rtol=1e-12)


def test_unipotents(rng):
    assert np.allclose(unipotent_U([0, 0]), np.eye(3))
    assert unipotent_U([3, 5])[0].tolist() == [1, 3, 5]
    assert unipotent_V([3, 5])[:, 2].tolist() == [3, 5, 1]
    for _ in range(50):
        x, y = rng.standard_normal((2, 3))
        assert np.allclose(unipotent_U(x) @ unipotent_U(y), unipotent_U(x + y), atol=1e-14)
        assert np.allclose(unipotent_U(x) @ unipotent_U(-x), np.eye(4), atol=1e-14)
        assert np.allclose(unipotent_V(x) @ unipotent_V(y), unipotent_V(x + y), atol=1e-14)
        assert np.allclose(unipotent_V(x) @ unipotent_V(-x), np.eye(4), atol=1e-14)


def test_rotation_frame_examples(rng):
    assert np.allclose(rotation_frame([1.0, 0.0]), np.eye(3))
    z = rotation_frame([0.0, 1.0])
    assert np.allclose(z[1:, 1:], [[0, -1], [1, 0]])
    assert np.max(np.abs(z @ unipotent_U([1.0, 0.0]) @ np.linalg.inv(z) - unipotent_U([0, 1]))) \
        <= 1e-12
    for _ in range(200):
        n = int(rng.integers(1, 7))
        x = rng.standard_normal(n)
        z = rotation_frame(x)
        k = z[1:, 1:]
        assert np.max(np.abs(k.T @ k - np.eye(n))) <= 1e-12
        if n > 1:
            assert np.linalg.det(k) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(k[:, 0], x / np.linalg.norm(x), atol=1e-12)
        lhs = z @ unipotent_U(np.linalg.norm(x) * np.eye(n)[0]) @ z.T
        assert np.max(np.abs(lhs - unipotent_U(x))) <= 1e-12 * max(1, np.linalg.norm(x))
    with pytest.raises(ValueError):
        rotation_frame([0.0, 0.0])


def test_rotation_frame_is_deterministic():
    x = [0.3, -1.2, 0.7]
    assert np.array_equal(rotation_frame(x), rotation_frame(list(x)))


def test_conjugation_identity(rng):
    w = Weight([0.5, 0.5])
    p = FlowParams(16, 1, w)
    y = np.array([0.3, -0.7])
    assert np.allclose(conjugate_unipotent_by_flow(p, w, 0.0, y), y)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        w = random_weight(rng, n)
        p = FlowParams(int(rng.integers(2, 40)), 1, w)
        t = float(rng.uniform(-6, 6))
        y = rng.standard_normal(n)
        lhs = flow_g(p, w, t) @ unipotent_U(y) @ flow_g(p, w, -t)
        rhs = unipotent_U(conjugate_unipotent_by_flow(p, w, t, y))
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))


def test_conjugation_coefficient_matching():
    # y = R^{-q+l} c e_i at t = q maps to c R^{l - (1 - lambda_i) q} e_i
    w = Weight([0.6, 0.4])
    R, q, l, c = 8, 5, 2, 0.37
    p = FlowParams(R, 1, w)
    for i in range(2):
        y = np.zeros(2)
        y[i] = R ** (-q + l) * c
        got = conjugate_unipotent_by_flow(p, w, q, y)
        want = c * R ** (l - (1 - p.lam[i]) * q)
        assert got[i] == pytest.approx(want, rel=1e-12)
        assert got[1 - i] == 0


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_flow_a_group_law_property(t, s):
    w = Weight([0.5, 0.3, 0.2])
    assert np.allclose(flow_a(w, t) @ flow_a(w, s), flow_a(w, t + s), rtol=1e-9, atol=0)
