"""Independent re-verification of survivors by explicit matrix products.

Shares nothing with the survival sweep beyond the configuration: the
lattice basis g_r(q) U(phi(x)) is formed as a matrix, and both integer
neighbours of -a.phi(x) are tried for a_0.
"""

from __future__ import annotations

import numpy as np

from .config import ConstructionConfig

RECHECK_CAP = 0.5


def _box(bounds) -> np.ndarray:
    axes = [np.arange(-b, b + 1) for b in bounds]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(bounds))
    return g[np.any(g != 0, axis=1)]


def min_norms(cfg: ConstructionConfig, xs, q: int, cap: float = RECHECK_CAP,
              chunk: int = 1024) -> np.ndarray:
    """min(lambda_1, cap) of g_r(q) U(phi(x)) Z^{n+1} for every x, cap <= 1."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n = cfg.n
    g = np.exp(np.array([1.0] + [-r for r in cfg.weight.r]) * q * cfg.log_b)
    bounds = [int(np.floor(cap / g[i + 1] * (1 + 1e-9))) for i in range(n)]
    out = np.full(xs.size, cap)
    # a = (a_0, 0, ..., 0) has norm b^q |a_0|
    out = np.minimum(out, g[0])
    if all(b == 0 for b in bounds):
        return out
    A = _box(bounds).astype(float)          # (K, n)
    tail = np.max(np.abs(A * g[None, 1:]), axis=1)                    # (K,)
    for s in range(0, xs.size, chunk):
        x = xs[s:s + chunk]
        phi = np.asarray(cfg.curve.eval(x)).reshape(x.size, n)
        # g U(phi(x)) for every x: U has first row (1, phi) and identity below
        mats = np.broadcast_to(np.eye(n + 1), (x.size, n + 1, n + 1)).copy()
        mats[:, 0, 1:] = phi
        mats = g[None, :, None] * mats                                # (X, d, d)
        dot = phi @ A.T                                               # (X, K)
        # first row of the basis applied to (a_0, a); the other rows are diagonal
        row0 = mats[:, 0, 1:] @ A.T                                   # (X, K)
        best = np.full(x.size, np.inf)
        for a0 in (np.floor(-dot), np.ceil(-dot)):
            vec0 = mats[:, 0, 0][:, None] * a0 + row0
            norms = np.maximum(np.abs(vec0), tail[None, :])
            best = np.minimum(best, norms.min(axis=1))
        out[s:s + chunk] = np.minimum(out[s:s + chunk], best)
    return out


def recheck_table(cfg: ConstructionConfig, xs, cap: float = RECHECK_CAP) -> np.ndarray:
    """Columns q = 0..depth of min(lambda_1, cap)."""
    return np.column_stack([min_norms(cfg, xs, q, cap) for q in range(cfg.depth + 1)])


_ULP = 2.0 ** -52


def _image(cfg: ConstructionConfig, xs: np.ndarray) -> np.ndarray:
    return np.asarray(cfg.curve.eval(xs)).reshape(xs.size, cfg.n)


def direct_lower_bounds(cfg: ConstructionConfig, xs, Q: int, chunk: int = 256) -> np.ndarray:
    """Lower bounds for min_{0<q<=Q} max_i q^{r_i} dist(q phi_i(x), Z), one per x.

    Double precision with a rounding envelope; entries whose bound is not
    positive are recomputed exactly from the binary value of x.
    """
    from fractions import Fraction
    from ..diophantine import XVec, badness_constant_direct

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    r = np.array(cfg.weight.r)
    q = np.arange(1, Q + 1, dtype=float)
    qr = q[:, None] ** r[None, :]                                      # (Q, n)
    out = np.empty(xs.size)
    for s in range(0, xs.size, chunk):
        phi = _image(cfg, xs[s:s + chunk])                             # (X, n)
        # phi_i carries a few ulps from evaluation, q*phi one more
        env = Q * np.max(np.abs(phi)) * 10 * _ULP
        val = None
        for i in range(cfg.n):
            y = phi[:, i, None] * q[None, :]                           # (X, Q)
            d = qr[None, :, i] * (np.abs(y - np.rint(y)) - env)
            val = d if val is None else np.maximum(val, d)
        out[s:s + chunk] = np.maximum(val.min(axis=1), 0.0)
    for j in np.flatnonzero(out <= 0):
        sx = Fraction(float(xs[j]))
        pts = XVec.of([sx ** (k + 1) for k in range(cfg.n)]) if cfg.curve_name == "moment" else \
            XVec.of([float(v) for v in _image(cfg, xs[j:j + 1])[0]])
        out[j] = float(badness_constant_direct(pts, cfg.weight, Q).constant)
    return out


def derived_dual_threshold(cfg: ConstructionConfig, slack: float = 0.02) -> tuple[float, float]:
    """(c, N_max) such that a survivor of the recheck at radius (1-slack) kappa
    has only the zero solution of |a_0 + a.x| < c/N, |a_i| < N^{r_i}, for N <= N_max.

    A vector with |a_i| < N^{r_i} fits the box of the first q with
    kappa' b^{r_i q} >= N^{r_i}; that q has b^q < b N kappa'^{-1/r_min}.
    """
    k = (1 - slack) * cfg.kappa
    rmin = min(cfg.weight.r)
    c = k ** (1 + 1 / rmin) / cfg.b
    nmax = k ** (1 / rmin) * cfg.b ** cfg.depth
    return c, nmax


def dual_constants(cfg: ConstructionConfig, xs, N_max: float, chunk: int = 256) -> np.ndarray:
    """For each x, the largest c with only the zero solution for every 1 <= N <= N_max.

    For a fixed a the binding N is the smallest admissible one, so the value is
    min over a != 0 with M(a) = max_i |a_i|^{1/r_i} < N_max of
    |a_0 + a.x| max(M(a), 1), a_0 nearest to -a.x.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    r = np.array(cfg.weight.r)
    bounds = [int(np.ceil(N_max ** ri)) - 1 for ri in r]
    A = _box(bounds).astype(float)
    M = np.max(np.abs(A) ** (1 / r[None, :]), axis=1)
    A, M = A[M < N_max], M[M < N_max]
    weight = np.maximum(M, 1.0)
    out = np.full(xs.size, np.inf)
    if A.shape[0] == 0:
        return out
    for s in range(0, xs.size, chunk):
        f = _image(cfg, xs[s:s + chunk]) @ A.T                        # (X, K)
        out[s:s + chunk] = np.min(np.abs(f - np.rint(f)) * weight[None, :], axis=1)
    # the a_0-only vectors: |a_0| >= 1 needs N > 0, giving c <= 1
    return np.minimum(out, 1.0)


def _survivor_job(job):
    cfg, xs = job
    H = int(np.floor(cfg.b ** cfg.depth * (1 + 1e-12)))
    c, nmax = derived_dual_threshold(cfg)
    return recheck_table(cfg, xs), direct_lower_bounds(cfg, xs, H), dual_constants(cfg, xs, nmax)


def survivor_checks(cfg: ConstructionConfig, xs, workers: int = 1, chunk: int = 4096):
    """(recheck table, direct lower bounds at horizon floor(b^Q), dual constants).

    Every quantity is computed row by row, so the result does not depend on
    the chunk size or the number of workers.
    """
    from ..parallel import chunked, pmap
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if xs.size == 0:
        return np.zeros((0, cfg.depth + 1)), np.zeros(0), np.zeros(0)
    parts = pmap(_survivor_job, [(cfg, c) for c in chunked(xs, chunk)], workers)
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))
