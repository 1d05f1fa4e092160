import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badflow.cantor.certify import certified_max_norm
from badflow.cantor.config import ConstructionConfig, frozen_config, small_config
from badflow.cantor.recheck import (derived_dual_threshold, direct_lower_bounds, dual_constants,
                                    min_norms, recheck_table)
from badflow.cantor.richness import F_count, F_table, bucket_of, d_q_min, d_q_upper, richness_report
from badflow.cantor.taxonomy import (DANGEROUS, EXTREME, GENERIC, UNCLASSIFIED, Classification,
                                     detect_dangerous, empirical_shah_constant, eq_fraction,
                                     eq_membership, nondivergence_fraction, shah_lower_bound_scan)
from badflow.cantor.tree import (DeadNode, IntervalNode, Level, SequenceTree, TIE,
                                 grow, par_R, survival_test)
from badflow.diophantine import badness_constant_direct, dual_only_zero_solution
from badflow.errors import ResourceError
from badflow.exterior import MultiVector, act, split_wplus, sup_norm, w_plus
from badflow.flows import Weight, unipotent_U


def moment(s, n):
    s = np.asarray(s, dtype=float)
    return np.stack([s ** (k + 1) for k in range(n)], axis=-1)


def g_diag(cfg, q):
    return cfg.b ** (np.array([1.0] + [-r for r in cfg.weight.r]) * q)


# configuration ---------------------------------------------------------------------

def test_config_derived_values():
    cfg = frozen_config()
    assert cfg.kappa == pytest.approx(1 / 16)
    assert cfg.b ** 1.5 == pytest.approx(16)
    assert cfg.eta_value == pytest.approx(1 / 400)
    assert cfg.eta_prime == pytest.approx(1 / 400 / 1.5)
    for bad in ({"rho": 1.0}, {"rho": 0.0}, {"R": 1}, {"depth": -1}, {"grid": 1}):
        with pytest.raises(ValueError):
            frozen_config(**bad)
    with pytest.raises(ValueError):
        ConstructionConfig(weight=Weight([0.25, 0.75]), R=16, m=1)


# Par_R --------------------------------------------------------------------------------

def test_par_R_examples():
    assert par_R((0, 1), 2) == [(0, 0.5), (0.5, 1)]
    assert par_R((0, 1), 4) == [(0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1)]
    nested = [c for p in par_R((0, 1), 3) for c in par_R(p, 3)]
    assert len(nested) == 9
    assert all(hi - lo == pytest.approx(1 / 9) for lo, hi in nested)
    with pytest.raises(ValueError):
        par_R((0, 1), 1)


@given(st.floats(-10, 10), st.floats(0.01, 10), st.integers(2, 40))
def test_par_R_partition(a, length, R):
    parts = par_R((a, a + length), R)
    assert parts[0][0] == a and parts[-1][1] == a + length
    assert all(parts[k][1] == parts[k + 1][0] for k in range(R - 1))
    assert all(hi - lo == pytest.approx(length / R, rel=1e-9) for lo, hi in parts)


# certified maxima ------------------------------------------------------------------------

def test_certified_max_examples():
    cfg = frozen_config()
    e = certified_max_norm(np.array([1, 0, 0]), 0, (0.5, 1.5), cfg)
    assert e.lower <= 1 <= e.upper and e.certified
    # a = (0, 0, 1) at q = 1: vector (b s^2, 0, b^{-1/2})
    e = certified_max_norm(np.array([0, 0, 1]), 1, (0.5, 1.5), cfg)
    assert e.lower <= cfg.b * 2.25 <= e.upper
    with pytest.raises(ValueError):
        certified_max_norm(np.zeros(3, dtype=int), 1, (0.5, 1.5), cfg)


def test_certified_max_soundness(rng):
    cfg = frozen_config()
    for _ in range(40):
        a = rng.integers(-5, 6, 3)
        if not a.any():
            continue
        q = float(rng.uniform(0, 4))
        lo = float(rng.uniform(0.5, 1.4))
        hi = min(1.5, lo + float(rng.uniform(1e-4, 0.3)))
        e = certified_max_norm(a, q, (lo, hi), cfg)
        s = np.linspace(lo, hi, 20001)
        M = np.diag(g_diag(cfg, q))
        vals = np.array([np.max(np.abs(M @ unipotent_U(moment(si, 2)) @ a)) for si in s[::10]])
        assert vals.max() <= e.upper * (1 + 1e-12)
        assert e.lower <= e.upper
        if e.certified:
            assert e.upper - e.lower <= 0.01 * cfg.kappa * (1 + 1e-9)


# survival ---------------------------------------------------------------------------------

def brute_dead(cfg, q, box=8, grid=10 ** 4):
    """Level-q indices with a sample s and an integer a in [-box, box]^{n+1}
    giving |g_r(q) U(phi(s)) a| <= kappa.  Samples: a uniform grid plus every
    node endpoint, since nodes are closed and share endpoints."""
    A, B = cfg.domain
    h = cfg.node_length(q)
    ends = A + h * np.arange(cfg.R ** q + 1)
    s = np.union1d(np.linspace(A, B, grid), ends)
    phi = moment(s, cfg.n)
    g = g_diag(cfg, q)
    dead = np.zeros(s.size, bool)
    for rest in itertools.product(range(-box, box + 1), repeat=cfg.n):
        rest = np.array(rest, dtype=float)
        if np.max(np.abs(rest) * g[1:]) > cfg.kappa * (1 + TIE):
            continue
        f = phi @ rest
        for a0 in range(-box, box + 1):
            if a0 == 0 and not rest.any():
                continue
            dead |= g[0] * np.abs(a0 + f) <= cfg.kappa * (1 + TIE)
    pos = (s[dead] - A) / h
    idx = set(np.minimum(np.floor(pos + 1e-9).astype(int), cfg.R ** q - 1).tolist())
    # an endpoint sample belongs to the node on its left as well
    idx |= {int(k) - 1 for k in np.rint(pos[np.abs(pos - np.rint(pos)) < 1e-9]) if k >= 1}
    return idx


def test_q0_everything_alive():
    for cfg in (frozen_config(), small_config()):
        assert survival_test(IntervalNode(0, 0, *cfg.domain, "alive"), cfg).alive


def test_survival_against_brute_force_frozen_q1():
    cfg = frozen_config()
    tree = grow(cfg.with_(depth=1), classify=False)
    assert {d.index for d in tree.level(1).dead} == brute_dead(cfg, 1)


def test_survival_against_brute_force_small_q3(small_build):
    cfg = small_config()
    tree = small_build.tree
    assert all(not tree.level(q).dead for q in (1, 2))
    engine = {d.index for d in tree.level(3).dead}
    assert engine and engine == brute_dead(cfg, 3)


def test_dead_witness_reaches_kappa(frozen_build):
    cfg = frozen_config()
    for lev in frozen_build.tree.levels[1:]:
        for d in lev.dead[:200]:
            a = np.array(d.witness, dtype=float)
            v = np.diag(g_diag(cfg, lev.q)) @ unipotent_U(moment(d.s_star, 2)) @ a
            assert np.max(np.abs(v)) <= cfg.kappa * (1 + 1e-8)
            lo, hi = cfg.node_interval(lev.q, d.index)
            assert lo <= d.s_star <= hi
            assert d.witness_min <= d.witness_max
            assert not d.indeterminate


def test_tree_structure(frozen_build):
    tree = frozen_build.tree
    R = tree.cfg.R
    for q in range(1, tree.depth + 1):
        lev = tree.level(q)
        kids = set((tree.level(q - 1).alive[:, None] * R + np.arange(R)).ravel().tolist())
        got = set(lev.alive.tolist()) | {d.index for d in lev.dead}
        assert got == kids
        assert not set(lev.alive.tolist()) & {d.index for d in lev.dead}
    assert 0 < tree.survivors().size <= R ** tree.depth


def test_node_cap():
    with pytest.raises(ResourceError):
        grow(frozen_config(max_nodes=100), classify=False)


def test_survivor_recheck_small(small_build):
    cfg = small_config()
    xs = np.array([0.5 * sum(cfg.node_interval(cfg.depth, i)) for i in small_build.tree.survivors()])
    assert np.all(recheck_table(cfg, xs) >= cfg.kappa * 0.98)


def test_min_norms_against_enumeration(rng):
    from badflow.lattice import LatticeBasis, shortest_vector
    cfg = frozen_config()
    for _ in range(30):
        x = float(rng.uniform(0.5, 1.5))
        q = int(rng.integers(0, 5))
        L = LatticeBasis(np.diag(g_diag(cfg, q)) @ unipotent_U(moment(x, 2)), unimodular=True)
        want = min(shortest_vector(L)[1], 0.5)
        assert min_norms(cfg, [x], q)[0] == pytest.approx(want, rel=1e-9)


def test_direct_lower_bounds_against_exact(rng):
    cfg = frozen_config()
    xs = rng.uniform(0.5, 1.5, 12)
    got = direct_lower_bounds(cfg, xs, 300)
    for x, lb in zip(xs, got):
        exact = badness_constant_direct([float(x), float(x) ** 2], cfg.weight, 300).constant
        assert lb <= exact * (1 + 1e-9)
        assert lb >= exact * (1 - 1e-6)


def test_dual_constants_imply_dual_test(rng):
    cfg = frozen_config()
    c, nmax = derived_dual_threshold(cfg)
    xs = rng.uniform(0.5, 1.5, 8)
    vals = dual_constants(cfg, xs, nmax)
    for x, v in zip(xs, vals):
        for N in (1.0, 2.0, 3.5, nmax):
            assert dual_only_zero_solution([float(x), float(x) ** 2], cfg.weight, 0.999 * v, N)


# taxonomy ------------------------------------------------------------------------------------

def test_partition_property(frozen_build):
    tree = frozen_build.tree
    for q in range(1, tree.depth + 1):
        for d in tree.level(q).dead:
            c = d.classification
            assert c is not None and c.kind in (GENERIC, DANGEROUS, EXTREME)
            assert 0 <= bucket_of(d, q) <= q - 1
            if c.kind == EXTREME:
                assert c.p == 0 and c.i in range(1, tree.cfg.n + 1)


def test_extremely_dangerous_split_norms(frozen_build):
    # the witness blade stays below rho^i on the window, so both halves of its
    # w+ split are that small at the midpoint
    cfg = frozen_config()
    checked = 0
    for q in range(1, cfg.depth + 1):
        for d in frozen_build.tree.level(q).dead:
            c = d.classification
            if c.kind != EXTREME or c.note:
                continue
            x = 0.5 * sum(cfg.node_interval(q, d.index))
            M = np.diag(g_diag(cfg, q)) @ unipotent_U(moment(x, 2))
            v = act(M, MultiVector.blade([np.array(b, dtype=float) for b in c.witness]))
            head, tail = split_wplus(v)
            bound = cfg.rho ** c.i * (1 + 1e-9)
            assert max(float(sup_norm(head)), float(sup_norm(tail))) <= bound
            assert sup_norm(v) <= bound
            checked += 1
    assert checked > 0


def test_classification_leaves_unclassified_out(frozen_build):
    rep = frozen_build.richness
    for lev in rep.levels:
        assert UNCLASSIFIED not in lev["kinds"]


def brute_dangerous(cfg, q, l, box=4, grid=10 ** 4, local_a0=False):
    """(a, window) pairs with sampled peak in [rho/2, rho] on aligned windows."""
    A, B = cfg.domain
    w = 2 * (B - A) * float(cfg.R) ** (l - q)
    s = np.linspace(A, B, grid)
    phi = moment(s, cfg.n)
    g = g_diag(cfg, q)
    out = set()
    for t in range(int(math.floor((B - A) / w + 1e-9))):
        lo, hi = A + w * t, A + w * (t + 1)
        P = phi[(s >= lo - 1e-12) & (s <= hi + 1e-12)]
        for rest in itertools.product(range(-box, box + 1), repeat=cfg.n):
            rest = np.array(rest)
            if not rest.any() or rest[np.flatnonzero(rest)[0]] < 0:
                continue
            f = P @ rest
            a0s = sorted(set((-np.rint(f)).astype(int).tolist())) if local_a0 else range(-box, box + 1)
            tail = np.max(np.abs(rest) * g[1:])
            for a0 in a0s:
                peak = max(g[0] * np.max(np.abs(a0 + f)), tail)
                if cfg.rho / 2 * (1 - TIE) <= peak <= cfg.rho * (1 + TIE):
                    out.add(((int(a0),) + tuple(int(v) for v in rest), round(lo, 12), round(hi, 12)))
    return out


def test_dangerous_detector_small_config():
    cfg = small_config()
    assert {r.key() for r in detect_dangerous(2, 1, cfg)} == brute_dangerous(cfg, 2, 1)


def test_dangerous_detector_nonempty_case():
    cfg = small_config()
    got = {r.key() for r in detect_dangerous(4, 1, cfg)}
    assert got and got == brute_dangerous(cfg, 4, 1, box=8)


def test_dangerous_detector_frozen_q3():
    cfg = frozen_config()
    got = detect_dangerous(3, 1, cfg)
    assert {r.key() for r in got} == brute_dangerous(cfg, 3, 1, box=4, grid=2001, local_a0=True)
    for r in got:
        assert r.peak_lower <= r.peak <= r.peak_upper
        assert cfg.rho / 2 * (1 - TIE) <= r.peak <= cfg.rho * (1 + TIE)


def test_dangerous_detector_edges():
    cfg = small_config()
    assert detect_dangerous(1, 1, cfg) == []        # empty a-box
    with pytest.raises(ValueError):
        detect_dangerous(2, 3, cfg)
    # records for a fixed a are disjoint or identical
    recs = detect_dangerous(4, 1, cfg)
    for a, b in itertools.combinations(recs, 2):
        if a.witness == b.witness and a.key() != b.key():
            assert a.hi <= b.lo or b.hi <= a.lo


def brute_eq(cfg, q, s):
    r = cfg.weight.r
    bq = cfg.b ** q
    hits = []
    phi, dphi = moment(s, 2), np.array([1.0, 2 * s])
    for a in itertools.product(range(-12, 13), range(-5, 6), range(-5, 6)):
        if not any(a):
            continue
        if not all(abs(a[i + 1]) < cfg.rho * cfg.b ** (r[i] * q) * (1 - 1e-9) for i in range(2)):
            continue
        f = a[0] + a[1] * phi[0] + a[2] * phi[1]
        df = a[1] * dphi[0] + a[2] * dphi[1]
        if abs(f) < cfg.rho / bq and abs(df) < cfg.b ** ((r[0] - cfg.eta_value) * q):
            hits.append(a)
    return hits


def test_eq_membership_brute_force():
    cfg = small_config()
    for s in [1.0] + list(np.linspace(0.5, 1.5, 41)):
        member, wit = eq_membership(float(s), 3, cfg)
        hits = brute_eq(cfg, 3, float(s))
        assert member == bool(hits)
        if member:
            assert wit in hits or tuple(-v for v in wit) in hits
    with pytest.raises(ValueError):
        eq_membership(2.0, 3, cfg)
    assert eq_membership(1.0, 0, cfg) == (False, None)


def test_nondivergence_monotone():
    cfg = frozen_config()
    fr = [nondivergence_fraction(3, (0.9, 1.1), eps, cfg, grid=501).fraction
          for eps in (1e-6, 0.01, 0.05, 0.1, 0.2)]
    assert fr == sorted(fr)
    assert fr[0] == 0
    with pytest.raises(ValueError):
        nondivergence_fraction(3, (0.9, 1.1), 0.0, cfg)
    with pytest.raises(ValueError):
        nondivergence_fraction(3, (0.0, 1.1), 0.1, cfg)


def test_shah_scan():
    cfg = frozen_config()
    assert shah_lower_bound_scan(w_plus(3), 0.0, cfg) == pytest.approx(1.0, rel=1e-9)
    v = MultiVector(3, 2, np.array([0.3, -1.2, 0.7]))
    base = shah_lower_bound_scan(v, 1.5, cfg)
    assert shah_lower_bound_scan(v * 2.5, 1.5, cfg) == pytest.approx(2.5 * base, rel=1e-8)
    assert shah_lower_bound_scan(v * -1.0, 1.5, cfg) == pytest.approx(base, rel=1e-8)
    c = empirical_shah_constant(cfg, 2, 0.0, samples=100)
    assert 0 < c <= 1
    # a rho with rho^3 above the measured constant triggers the warning
    with pytest.warns(RuntimeWarning):
        empirical_shah_constant(cfg.with_(rho=min(0.999, (1.5 * c) ** (1 / 3))), 2, 0.0, samples=100)
    assert empirical_shah_constant(cfg, 2, 1.0, samples=100) > 0


# richness -----------------------------------------------------------------------------------

def toy_tree(R, dead_q2):
    cfg = small_config(R=R, depth=2)
    lv0 = Level(0, np.array([0]))
    lv1 = Level(1, np.arange(R))
    dead = [DeadNode(i, (0, 1, 0), 1.0, 0.0, 0.0, False, Classification(GENERIC, p))
            for i, p in dead_q2]
    alive = np.array(sorted(set(range(R * R)) - {i for i, _ in dead_q2}))
    return SequenceTree(cfg, [lv0, lv1, Level(2, alive, dead)])


def test_d_q_examples():
    R = 8
    cfg = small_config(R=R, depth=1)
    dead = [DeadNode(i, (0, 1, 0), 1.0, 0.0, 0.0, False, Classification(GENERIC, 0)) for i in range(R)]
    full = SequenceTree(cfg, [Level(0, np.array([0])), Level(1, np.zeros(0, np.int64), dead)])
    assert d_q_upper(1, full) == pytest.approx(4.0)
    empty = toy_tree(8, [])
    assert d_q_upper(2, empty) == 0 and d_q_min(2, empty) == 0
    # nodes 0, 1, 5 under parent 0 in bucket 1; node 9 under parent 1 in bucket 0
    t = toy_tree(8, [(0, 1), (1, 1), (5, 1), (9, 0)])
    assert F_count(2, 1, 0, t) == 3 and F_count(2, 1, 1, t) == 0 and F_count(2, 0, 0, t) == 1
    assert d_q_upper(2, t) == pytest.approx(0.5 * 3 + 0.25 * 1)
    # best split: one node per parent in bucket 1, the other two in bucket 0
    assert d_q_min(2, t) == pytest.approx(1.0)
    assert d_q_upper(2, t, "exhaustive") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        d_q_upper(3, t)


def test_F_count_manual_walk(frozen_build):
    tree = frozen_build.tree
    cfg = tree.cfg
    q = tree.depth
    for p in range(q):
        table = F_table(q, tree)
        for I_p in list(table.get(p, {}))[:5] + [0]:
            lo, hi = cfg.node_interval(p, I_p)
            want = 0
            for d in tree.level(q).dead:
                dlo, dhi = cfg.node_interval(q, d.index)
                if bucket_of(d, q) == p and lo - 1e-12 <= dlo and dhi <= hi + 1e-12:
                    want += 1
            assert F_count(q, p, I_p, tree) == want
            assert want <= cfg.R ** (q - p)


def test_d_q_min_below_canonical(small_build):
    tree = small_build.tree
    for q in range(1, tree.depth + 1):
        assert 0 <= d_q_min(q, tree) <= d_q_upper(q, tree) + 1e-15


def test_richness_report(frozen_build):
    rep = frozen_build.richness
    assert rep.survivors == frozen_build.tree.survivors().size > 0
    assert sum(hi - lo + 1 for lo, hi in rep.survivor_ranges) == rep.survivors
    assert rep.d_upper == max(l["d_q_upper"] for l in rep.levels)
    assert richness_report(frozen_build.tree).to_dict() == rep.to_dict()


def test_eq_fraction_bounds():
    cfg = small_config()
    for q in range(0, 4):
        assert 0 <= eq_fraction(q, cfg, grid=501) <= 1
    assert eq_fraction(0, cfg, grid=501) == 0
