"""Generation-by-generation interval survival.

A level-q node I dies iff some integer a != 0 and some s in I give
|g_r(q) U(phi(s)) a| <= kappa.  With a = (a_0, a_1..a_n) that means
|a_i| <= kappa b^{r_i q} and dist(a . phi(s), Z) <= kappa b^{-q}, a_0 being
the nearest integer.  Each node is sampled on a grid and the Lipschitz bound
C1 sum|a_i| of s -> a . phi(s) decides the gaps; undecided nodes are refined
and finally counted dead (flagged indeterminate).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ResourceError
from ..parallel import chunked, pmap
from .config import ConstructionConfig

TIE = 1e-9
CHUNK = 2048


def par_R(interval: tuple[float, float], R: int) -> list[tuple[float, float]]:
    """Split a closed interval into R equal closed pieces."""
    if int(R) != R or R < 2:
        raise ValueError("R must be an integer >= 2")
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError("interval must have positive length")
    pts = [lo + (hi - lo) * k / R for k in range(R)] + [hi]
    return [(pts[k], pts[k + 1]) for k in range(R)]


def integer_box(bounds) -> np.ndarray:
    """Integer vectors with |a_i| <= bounds[i], a != 0, first nonzero entry positive."""
    bounds = [int(b) for b in bounds]
    n = len(bounds)
    if all(b <= 0 for b in bounds):
        return np.zeros((0, n), dtype=np.int64)
    axes = [np.arange(-b, b + 1, dtype=np.int64) for b in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    nz = grid[np.any(grid != 0, axis=1)]
    lead = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
    return nz[lead > 0]


def box_bounds(cfg: ConstructionConfig, q: int, radius: float, strict: bool = False) -> list[int]:
    """floor(radius b^{r_i q}), or the largest integer strictly below it."""
    out = []
    for ri in cfg.weight.r:
        v = radius * np.exp(ri * q * cfg.log_b)
        if strict:
            k = int(np.floor(v))
            if abs(v - round(v)) <= TIE * max(1.0, v):
                k = int(round(v)) - 1
        else:
            k = int(np.floor(v * (1 + TIE)))
        out.append(max(k, 0))
    return out


def _forms(phi: np.ndarray, a: np.ndarray) -> np.ndarray:
    """sum_i a_i phi_i elementwise; explicit loop keeps results chunk-independent."""
    f = a[0] * phi[..., 0]
    for i in range(1, phi.shape[-1]):
        f = f + a[i] * phi[..., i]
    return f


@dataclass
class SurvivalBatch:
    dead: np.ndarray
    indeterminate: np.ndarray
    witness: np.ndarray      # (N, n+1) integers (a_0, a_1..a_n)
    s_star: np.ndarray
    witness_min: np.ndarray  # norm at s_star
    witness_max: np.ndarray  # certified max over the node with a_0 fixed


def survival_batch(cfg: ConstructionConfig, q: int, idx) -> SurvivalBatch:
    idx = np.asarray(idx, dtype=np.int64)
    N, n = idx.size, cfg.n
    out = SurvivalBatch(np.zeros(N, bool), np.zeros(N, bool), np.zeros((N, n + 1), np.int64),
                        np.full(N, np.nan), np.full(N, np.nan), np.full(N, np.nan))
    A = integer_box(box_bounds(cfg, q, cfg.kappa))
    if N == 0 or A.shape[0] == 0:
        return out
    bq = np.exp(q * cfg.log_b)
    thr = cfg.kappa / bq * (1 + TIE)
    small = np.exp(-np.array(cfg.weight.r) * q * cfg.log_b)
    const = np.max(np.abs(A) * small[None, :], axis=1)
    lip = cfg.curve.C1 * np.abs(A).sum(axis=1)
    h = cfg.node_length(q)
    lo = cfg.domain[0] + h * idx
    pending = np.arange(N)
    M = cfg.grid
    best_k = np.zeros(N, np.int64)
    best_j = np.zeros(N, np.int64)
    grid_of = np.full(N, M)
    for rnd in range(cfg.refine_rounds + 1):
        P = pending.size
        frac = np.arange(M) / (M - 1)
        s = lo[pending, None] + h * frac[None, :]
        phi = np.asarray(cfg.curve.eval(s.ravel())).reshape(P, M, n)
        bmn = np.full(P, np.inf)
        bk = np.zeros(P, np.int64)
        bj = np.zeros(P, np.int64)
        clear = np.ones(P, bool)
        half = h / (M - 1) / 2
        for k in range(A.shape[0]):
            f = _forms(phi, A[k])
            dist = np.abs(f - np.rint(f))
            j = np.argmin(dist, axis=1)
            mn = dist[np.arange(P), j]
            better = mn < bmn
            bmn = np.where(better, mn, bmn)
            bk = np.where(better, k, bk)
            bj = np.where(better, j, bj)
            clear &= mn - lip[k] * half > thr
        isdead = bmn <= thr
        best_k[pending], best_j[pending], grid_of[pending] = bk, bj, M
        out.dead[pending[isdead]] = True
        pending = pending[~(isdead | clear)]
        if pending.size == 0:
            break
        if rnd < cfg.refine_rounds:
            M = 4 * (M - 1) + 1
    out.dead[pending] = True
    out.indeterminate[pending] = True

    # witnesses for dead nodes
    rows = np.flatnonzero(out.dead)
    for r in rows:
        Mr = int(grid_of[r])
        s = lo[r] + h * np.arange(Mr) / (Mr - 1)
        phi = np.asarray(cfg.curve.eval(s)).reshape(Mr, n)
        a = A[best_k[r]]
        f = _forms(phi, a)
        j = int(best_j[r])
        a0 = -int(np.rint(f[j]))
        out.witness[r] = np.concatenate([[a0], a])
        out.s_star[r] = s[j]
        c = float(const[best_k[r]])
        out.witness_min[r] = max(bq * abs(a0 + f[j]), c)
        slack = lip[best_k[r]] * h / (Mr - 1) / 2
        out.witness_max[r] = max(c, bq * (float(np.max(np.abs(a0 + f))) + slack))
    return out


@dataclass(frozen=True)
class IntervalNode:
    q: int
    index: int
    lo: float
    hi: float
    status: str                       # "alive" or "dead"
    classification: Optional[object] = None
    witness: Optional[tuple] = None

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class SurvivalResult:
    alive: bool
    witness: Optional[tuple]
    indeterminate: bool
    s_star: Optional[float] = None
    witness_min: Optional[float] = None
    witness_max: Optional[float] = None


def survival_test(node: IntervalNode, cfg: ConstructionConfig) -> SurvivalResult:
    """Alive, or dead with an integer witness (a_0, ..., a_n)."""
    sb = survival_batch(cfg, node.q, [node.index])
    if not sb.dead[0]:
        return SurvivalResult(True, None, False)
    return SurvivalResult(False, tuple(int(v) for v in sb.witness[0]), bool(sb.indeterminate[0]),
                          float(sb.s_star[0]), float(sb.witness_min[0]), float(sb.witness_max[0]))


@dataclass
class DeadNode:
    index: int
    witness: tuple
    s_star: float
    witness_min: float
    witness_max: float
    indeterminate: bool
    classification: Optional[object] = None


@dataclass
class Level:
    q: int
    alive: np.ndarray
    dead: list = field(default_factory=list)

    def dead_indices(self) -> np.ndarray:
        return np.array([d.index for d in self.dead], dtype=np.int64)


@dataclass
class SequenceTree:
    cfg: ConstructionConfig
    levels: list

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def level(self, q: int) -> Level:
        return self.levels[q]

    def survivors(self) -> np.ndarray:
        return self.levels[-1].alive

    def node(self, q: int, index: int) -> IntervalNode:
        lo, hi = self.cfg.node_interval(q, index)
        lev = self.levels[q]
        for d in lev.dead:
            if d.index == index:
                return IntervalNode(q, index, lo, hi, "dead", d.classification, d.witness)
        pos = np.searchsorted(lev.alive, index)
        if pos < lev.alive.size and lev.alive[pos] == index:
            return IntervalNode(q, index, lo, hi, "alive")
        raise KeyError(f"node {index} was never generated at level {q}")

    def nodes(self, q: int) -> list[IntervalNode]:
        out = [self.node(q, int(i)) for i in self.levels[q].alive]
        out += [self.node(q, d.index) for d in self.levels[q].dead]
        return sorted(out, key=lambda nd: nd.index)


def _survive_job(job):
    cfg, q, idx = job
    return survival_batch(cfg, q, idx)


def _classify_job(job):
    from .taxonomy import classify_dead
    cfg, q, indices = job
    out = []
    for i in indices:
        lo, hi = cfg.node_interval(q, int(i))
        out.append(classify_dead(IntervalNode(q, int(i), lo, hi, "dead"), cfg))
    return out


def grow(cfg: ConstructionConfig, workers: int = 1, classify: bool = True) -> SequenceTree:
    levels = [Level(0, np.array([0], dtype=np.int64))]
    for q in range(1, cfg.depth + 1):
        parents = levels[-1].alive
        count = parents.size * cfg.R
        if count > cfg.max_nodes:
            raise ResourceError(f"level {q} would hold {count} nodes, cap {cfg.max_nodes}")
        children = (parents[:, None] * cfg.R + np.arange(cfg.R)[None, :]).ravel()
        jobs = [(cfg, q, c) for c in chunked(children, CHUNK)]
        parts = pmap(_survive_job, jobs, workers)
        dead_mask = np.concatenate([p.dead for p in parts]) if parts else np.zeros(0, bool)
        dead = []
        offset = 0
        for part in parts:
            for r in np.flatnonzero(part.dead):
                dead.append(DeadNode(int(children[offset + r]), tuple(int(v) for v in part.witness[r]),
                                     float(part.s_star[r]), float(part.witness_min[r]),
                                     float(part.witness_max[r]), bool(part.indeterminate[r])))
            offset += part.dead.size
        levels.append(Level(q, children[~dead_mask], dead))
    if classify:
        for lev in levels[1:]:
            if not lev.dead:
                continue
            jobs = [(cfg, lev.q, c) for c in chunked([d.index for d in lev.dead], 16)]
            res = list(itertools.chain.from_iterable(pmap(_classify_job, jobs, workers)))
            for d, c in zip(lev.dead, res):
                d.classification = c
    return SequenceTree(cfg, levels)


@dataclass
class BuildResult:
    tree: SequenceTree
    richness: object


def build_sequence(cfg: ConstructionConfig, workers: int = 1, classify: bool = True) -> BuildResult:
    """Grow the R-sequence to cfg.depth and score it."""
    from .richness import richness_report
    tree = grow(cfg, workers=workers, classify=classify)
    return BuildResult(tree, richness_report(tree))
