"""Classification of dead intervals and the dangerous-interval detectors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exterior import MultiVector
from ..flows import unipotent_U
from ..lattice import LatticeBasis, enumerate_primitive_sublattices
from .certify import FlowedMultivector, clip_window, window_max
from .config import ConstructionConfig
from .tree import IntervalNode, TIE, _forms, box_bounds, integer_box

GENERIC = "generic"
DANGEROUS = "dangerous"
EXTREME = "extremely_dangerous"
UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class Classification:
    kind: str
    p: int
    i: Optional[int] = None
    l: Optional[int] = None
    witness: Optional[tuple] = None   # integer basis vectors of the witness sublattice
    note: str = ""

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "p": self.p}
        if self.i is not None:
            d["i"] = self.i
        if self.l is not None:
            d["l"] = self.l
        if self.witness is not None:
            d["witness"] = [list(v) for v in self.witness]
        if self.note:
            d["note"] = self.note
        return d


def lattice_at(cfg: ConstructionConfig, q: float, s: float) -> LatticeBasis:
    """g_r(q) U(phi(s)) Z^{n+1}."""
    phi = np.asarray(cfg.curve.eval(float(s)), dtype=float).reshape(-1)
    ex = np.array([1.0] + [-r for r in cfg.weight.r]) * q * cfg.log_b
    return LatticeBasis(np.exp(ex)[:, None] * unipotent_U(phi))


@dataclass(frozen=True)
class Candidate:
    grade: int
    basis: tuple                  # integer column vectors
    flowed: FlowedMultivector


def candidates(cfg: ConstructionConfig, q: int, s: float) -> list[Candidate]:
    """Primitive sublattices of the lattice at s with covolume <= rho^j, j = 1..n."""
    L = lattice_at(cfg, q, s)
    out = []
    for j in range(1, cfg.n + 1):
        for S in enumerate_primitive_sublattices(L, j, cfg.rho ** j, cap=cfg.sublattice_cap):
            cols = tuple(tuple(int(v) for v in c) for c in S.vectors.T)
            v = MultiVector.blade([np.array(c, dtype=float) for c in cols])
            out.append(Candidate(j, cols, FlowedMultivector.build(v, cfg, q)))
    return out


BIG, SMALL, AMBIGUOUS = "big", "small", "ambiguous"


def _decide(cfg: ConstructionConfig, c: Candidate, lo: float, hi: float) -> str:
    thr = cfg.rho ** c.grade
    enc = window_max(c.flowed, cfg.curve, lo, hi, threshold=thr, tol=1e-9 * thr)
    if enc.lower >= thr:
        return BIG
    if enc.upper <= thr:
        return SMALL
    return AMBIGUOUS


def _half(cfg: ConstructionConfig, q: int, l: float) -> float:
    return cfg.length * float(cfg.R) ** (-q + l)


def classify_dead(node: IntervalNode, cfg: ConstructionConfig) -> Classification:
    """Assign a dead node to exactly one bucket.

    Order: generic at l_generic; dangerous(i, l) at the first l in
    (l_generic, l_max] where every candidate is large on the l-window while
    a grade-i candidate was small on the (l-1)-window; extremely dangerous(i)
    if a grade-i candidate stays <= rho^i on the window of half-length
    R^{-q(1-2 eta')}; otherwise unclassified.  Windows are centred at the
    midpoint and clipped to the domain.
    """
    q = node.q
    if q <= cfg.q_small:
        return Classification(GENERIC, 0, note="q below q_small")
    x = node.midpoint
    cands = candidates(cfg, q, x)
    lg = cfg.l_generic_value()

    def statuses(l, cs=cands, center=x):
        lo, hi = clip_window(cfg, center, _half(cfg, q, l))
        return [_decide(cfg, c, lo, hi) for c in cs]

    prev = statuses(lg)
    if all(s == BIG for s in prev):
        return Classification(GENERIC, max(q - 2 * lg, 0), l=lg)
    for l in range(lg + 1, min(cfg.l_max_for(q), q // 2) + 1):
        cur = statuses(l)
        if all(s == BIG for s in cur):
            small = [c for c, s in zip(cands, prev) if s == SMALL]
            if small:
                w = min(small, key=lambda c: c.grade)
                return Classification(DANGEROUS, q - 2 * l, i=w.grade, l=l, witness=w.basis)
        prev = cur
    half_e = cfg.length * float(cfg.R) ** (-q * (1 - 2 * cfg.eta_prime))
    centers = [x, node.lo, node.hi, node.lo + 0.25 * (node.hi - node.lo),
               node.lo + 0.75 * (node.hi - node.lo)]
    for center in centers:
        cs = cands if center == x else candidates(cfg, q, center)
        lo, hi = clip_window(cfg, center, half_e)
        for i in range(1, cfg.n + 1):
            for c in cs:
                if c.grade == i and _decide(cfg, c, lo, hi) == SMALL:
                    note = "" if center == x else f"window centred at {center!r}"
                    return Classification(EXTREME, 0, i=i, witness=c.basis, note=note)
    return Classification(UNCLASSIFIED, 0, note="no bucket certified")


# ---------------------------------------------------------------- detectors


@dataclass(frozen=True)
class DangerousRecord:
    kind: str                 # "dangerous" or "extremely_dangerous"
    q: int
    l: int
    witness: tuple            # (a_0, ..., a_n)
    lo: float
    hi: float
    peak: float               # largest sampled norm, a value the map attains
    peak_lower: float
    peak_upper: float
    certified: bool

    def key(self) -> tuple:
        return (self.witness, round(self.lo, 12), round(self.hi, 12))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q, "l": self.l, "witness": list(self.witness),
                "interval": [self.lo, self.hi], "peak": self.peak,
                "peak_enclosure": [self.peak_lower, self.peak_upper],
                "certified": self.certified}


def tiles(cfg: ConstructionConfig, q: int, l: int, region=None) -> np.ndarray:
    """Aligned windows of length 2 R^{-q+l} (times the domain length) inside the region."""
    A, B = region if region is not None else cfg.domain
    w = 2 * _half(cfg, q, l)
    count = int(math.floor((B - A) / w + 1e-9))
    lo = A + w * np.arange(count)
    return np.column_stack([lo, lo + w]) if count else np.zeros((0, 2))


def detect_dangerous(q: int, l: int, cfg: ConstructionConfig, region=None,
                     dead_indices=None, extreme: bool = False,
                     samples: int = 33) -> list[DangerousRecord]:
    """Windows Delta with an integer a whose certified peak over Delta lies in [rho/2, rho].

    Windows are the aligned tiles from ``tiles``; the a-box is
    |a_i| <= rho b^{r_i q} (one of each +-pair), and a_0 is the nearest
    integer to -a.phi on the window.  With ``extreme`` the peak is taken over
    the doubled window.  ``dead_indices`` keeps only windows containing one
    of the given dead level-q nodes.
    """
    if not 1 <= l <= q:
        raise ValueError(f"l must lie in 1..q, got l = {l}, q = {q}")
    T = tiles(cfg, q, l, region)
    A = integer_box(box_bounds(cfg, q, cfg.rho))
    if T.shape[0] == 0 or A.shape[0] == 0:
        return []
    if dead_indices is not None:
        h = cfg.node_length(q)
        dl = cfg.domain[0] + h * np.asarray(dead_indices, dtype=float)
        keep = np.array([np.any((dl >= lo - 1e-12 * h) & (dl + h <= hi + 1e-12 * h)) for lo, hi in T])
        T = T[keep]
        if T.shape[0] == 0:
            return []
    bq = np.exp(q * cfg.log_b)
    rho = cfg.rho
    frac = np.arange(samples) / (samples - 1)
    records = []
    for lo, hi in T:
        plo, phi_ = (clip_window(cfg, 0.5 * (lo + hi), hi - lo) if extreme else (lo, hi))
        s = plo + (phi_ - plo) * frac
        phi = np.asarray(cfg.curve.eval(s)).reshape(samples, cfg.n)
        for a in A:
            f = _forms(phi, a)
            a0 = -int(np.rint(f[0]))
            # the sampled maximum is a lower bound for the peak
            if bq * float(np.max(np.abs(a0 + f))) > rho * (1 + 1e-6):
                continue
            vec = np.concatenate([[a0], a]).astype(float)
            fm = FlowedMultivector.build(MultiVector.from_vector(vec), cfg, q)
            enc = window_max(fm, cfg.curve, plo, phi_, tol=1e-9 * rho)
            # peaks within TIE of rho/2 or rho count as inside
            lo_t, hi_t = rho / 2 * (1 - TIE), rho * (1 + TIE)
            if enc.upper < lo_t or enc.lower > hi_t:
                continue
            certified = enc.lower >= lo_t and enc.upper <= hi_t
            if not certified and not lo_t <= enc.mid <= hi_t:
                continue
            records.append(DangerousRecord(EXTREME if extreme else DANGEROUS, q, l,
                                           tuple(int(v) for v in vec), float(lo), float(hi),
                                           enc.lower, enc.lower, enc.upper, certified))
    records.sort(key=lambda r: (r.lo, r.witness))
    return records


# ---------------------------------------------------------------- E_q


def _eq_box(cfg: ConstructionConfig, q: int) -> np.ndarray:
    return integer_box(box_bounds(cfg, q, cfg.rho, strict=True))


def _eq_hits(cfg: ConstructionConfig, q: int, s: np.ndarray):
    """Per point: first witness index into the box, or -1."""
    A = _eq_box(cfg, q)
    hit = np.full(s.size, -1, dtype=np.int64)
    if A.shape[0] == 0:
        return hit, A
    bq = np.exp(q * cfg.log_b)
    fthr = cfg.rho / bq
    dthr = np.exp((cfg.weight.r[0] - cfg.eta_value) * q * cfg.log_b)
    phi = np.asarray(cfg.curve.eval(s)).reshape(s.size, cfg.n)
    dphi = np.asarray(cfg.curve.deriv(s)).reshape(s.size, cfg.n)
    for k in range(A.shape[0]):
        f = _forms(phi, A[k])
        df = _forms(dphi, A[k])
        ok = (np.abs(f - np.rint(f)) < fthr) & (np.abs(df) < dthr) & (hit < 0)
        hit[ok] = k
    return hit, A


def eq_membership(s: float, q: int, cfg: ConstructionConfig) -> tuple[bool, Optional[tuple]]:
    """Whether some a != 0 with |a_i| < rho b^{r_i q} has |f(s)| < rho b^{-q}
    and |f'(s)| < b^{(r_1 - eta) q}, f = a_0 + a . phi."""
    a_, b_ = cfg.domain
    if not a_ <= s <= b_:
        raise ValueError("s must lie in the curve's domain")
    hit, A = _eq_hits(cfg, q, np.array([float(s)]))
    if hit[0] < 0:
        return False, None
    a = A[hit[0]]
    f = float(_forms(np.asarray(cfg.curve.eval(float(s))).reshape(1, -1), a)[0])
    return True, (-int(np.rint(f)),) + tuple(int(v) for v in a)


def eq_fraction(q: int, cfg: ConstructionConfig, grid: int = 10001) -> float:
    """Fraction of a uniform grid on the domain lying in E_q."""
    s = np.linspace(cfg.domain[0], cfg.domain[1], grid)
    hit, _ = _eq_hits(cfg, q, s)
    return float(np.mean(hit >= 0))


# ---------------------------------------------------------------- non-divergence


@dataclass(frozen=True)
class NondivergenceReport:
    fraction: float
    grid: int
    eps: float
    hypothesis_holds: bool
    hypothesis_min_ratio: float   # min over candidates of (max over J) / rho^j


def nondivergence_fraction(q: int, J: tuple[float, float], eps: float,
                           cfg: ConstructionConfig, grid: int = 2001) -> NondivergenceReport:
    """Share of grid points x in J whose lattice g_r(q)U(phi(x))Z^{n+1} has a
    nonzero vector of sup norm <= eps, with the wedge-maxima hypothesis on J."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = float(J[0]), float(J[1])
    if not cfg.domain[0] <= lo < hi <= cfg.domain[1]:
        raise ValueError("J must be a subinterval of the domain")
    s = np.linspace(lo, hi, grid)
    bq = np.exp(q * cfg.log_b)
    fail = np.full(grid, bq <= eps * (1 + TIE))   # (a_0, 0, ..., 0) with a_0 = 1
    A = integer_box(box_bounds(cfg, q, eps))
    phi = np.asarray(cfg.curve.eval(s)).reshape(grid, cfg.n)
    thr = eps / bq * (1 + TIE)
    for a in A:
        f = _forms(phi, a)
        fail |= np.abs(f - np.rint(f)) <= thr
    # hypothesis: every small wedge at the centre of J has window max >= rho^j on J
    ratio = math.inf
    for c in candidates(cfg, q, 0.5 * (lo + hi)):
        enc = window_max(c.flowed, cfg.curve, lo, hi, tol=1e-6 * cfg.rho ** c.grade)
        ratio = min(ratio, enc.lower / cfg.rho ** c.grade)
    return NondivergenceReport(float(np.mean(fail)), grid, float(eps), bool(ratio >= 1.0),
                               float(ratio))


# ---------------------------------------------------------------- lower bound scan


def shah_lower_bound_scan(v: MultiVector, t: float, cfg: ConstructionConfig) -> float:
    """Certified lower bound of max over the domain of |g_r(t) U(phi(x)) v|.

    The enclosure is refined to relative width 1e-9, so the value is the
    maximum up to that tolerance.
    """
    fm = FlowedMultivector.build(v, cfg, t)
    scale = float(np.max(np.abs(v.to_float().coeffs))) or 1.0
    enc = window_max(fm, cfg.curve, cfg.domain[0], cfg.domain[1], tol=1e-9 * scale)
    return enc.lower


def empirical_shah_constant(cfg: ConstructionConfig, grade: int, t: float,
                            samples: int = 100, seed: int = 0) -> float:
    """min of scan(v) / |v| over random Gaussian multivectors; warns if rho^{n+1} exceeds it."""
    rng = np.random.default_rng(seed)
    d = cfg.n + 1
    C = math.comb(d, grade)
    c = math.inf
    for _ in range(samples):
        v = MultiVector(d, grade, rng.standard_normal(C))
        c = min(c, shah_lower_bound_scan(v, t, cfg) / v.norm())
    if cfg.rho ** (cfg.n + 1) > c:
        warnings.warn(f"rho^(n+1) = {cfg.rho ** (cfg.n + 1):.3g} exceeds the measured "
                      f"constant {c:.3g}", RuntimeWarning, stacklevel=2)
    return c
