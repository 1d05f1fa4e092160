"""Lattices in R^d under the sup norm.

Every search goes through the same pipeline: LLL-reduce the generator
matrix, bound the sup-norm ball by the Euclidean ball of radius sqrt(d) r,
enumerate that ball exactly (Fincke-Pohst), then filter by sup norm.  The
coefficient box is therefore certified, not heuristic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import intmat
from .errors import ResourceError
from .exterior import _det_exact

LLL_DELTA = 0.99
REL_TOL = 1e-9          # closed-ball slack for float comparisons
ENUM_CAP = 5_000_000    # raw lattice points per enumeration
SUBLATTICE_CAP = 10**6


def c_red(d: int) -> float:
    """Documented constant with |v_j| <= c_red * lambda_j for reduced bases."""
    return float(2 ** d)


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    basis: np.ndarray
    unimodular: bool = False

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("basis must be a square matrix")
        if not np.all(np.isfinite(b)):
            raise ValueError("basis has non-finite entries")
        det = float(np.linalg.det(b))
        if abs(det) <= 1e-12:
            raise ValueError(f"basis columns are dependent (det = {det:g})")
        if self.unimodular and abs(det - 1.0) > 1e-9:
            raise ValueError(f"unimodular basis must have det 1, got {det!r}")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.basis))


@dataclass(frozen=True, eq=False)
class Sublattice:
    """k integer column vectors, coordinates in the ambient lattice basis."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=object)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[1] < 1 or v.shape[1] > v.shape[0]:
            raise ValueError("sublattice needs 1 <= k <= d column vectors")
        v = np.vectorize(_to_int, otypes=[object])(v)
        if intmat.rank_exact(v.T.tolist()) != v.shape[1]:
            raise ValueError("sublattice generators are linearly dependent")
        object.__setattr__(self, "vectors", v)

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def columns(self) -> list[list[int]]:
        return [list(map(int, c)) for c in self.vectors.T]

    def canonical_key(self) -> tuple[tuple[int, ...], ...]:
        return intmat.hnf_rows(self.columns())

    def __eq__(self, other) -> bool:
        return isinstance(other, Sublattice) and self.canonical_key() == other.canonical_key()

    def __hash__(self) -> int:
        return hash(self.canonical_key())

    def __repr__(self) -> str:
        return f"Sublattice({self.columns()})"


def _to_int(x) -> int:
    xi = int(round(float(x))) if not isinstance(x, int) else x
    if isinstance(x, float) and x != xi:
        raise ValueError(f"non-integer sublattice coordinate {x!r}")
    return xi


@dataclass(frozen=True)
class MinimaProfile:
    minima: np.ndarray
    witnesses: np.ndarray       # columns are lattice vectors in R^d
    coefficients: np.ndarray    # integer columns in the ambient lattice basis


# ---------------------------------------------------------------- reduction

def lll(m, delta: float = LLL_DELTA, max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """LLL on the columns of a d x k float matrix.

    Returns (B, U) with B = m @ U and U an integer (object dtype) unimodular matrix.
    """
    M = np.array(m, dtype=float)
    k = M.shape[1]
    B = M.copy()
    U = np.array([[int(i == j) for j in range(k)] for i in range(k)], dtype=object)
    if k == 1:
        return B, U

    def gso(B):
        R = np.linalg.qr(B, mode="r")
        return R

    R = gso(B)
    i = 1
    it = 0
    while i < k:
        it += 1
        if it > max_iter:
            break
        for j in range(i - 1, -1, -1):
            mu = R[j, i] / R[j, j]
            if abs(mu) > 0.5:
                c = round(mu)
                B[:, i] -= c * B[:, j]
                U[:, i] = U[:, i] - int(c) * U[:, j]
                R[: j + 1, i] -= c * R[: j + 1, j]
        mu = R[i - 1, i] / R[i - 1, i - 1]
        if R[i, i] ** 2 + (mu * R[i - 1, i - 1]) ** 2 >= delta * R[i - 1, i - 1] ** 2:
            i += 1
        else:
            B[:, [i - 1, i]] = B[:, [i, i - 1]]
            U[:, [i - 1, i]] = U[:, [i, i - 1]]
            R = gso(B)
            i = max(i - 1, 1)
    # rebuild from exact coefficients to shed accumulated rounding
    B = M @ U.astype(float)
    return B, U


def _sup(B: np.ndarray) -> np.ndarray:
    return np.max(np.abs(B), axis=0)


def sup_size_reduce(B: np.ndarray, U: np.ndarray, max_rounds: int = 50):
    """Greedy pairwise b_j -> b_j - mu b_i while the sup norm strictly drops."""
    B = B.copy()
    U = U.copy()
    k = B.shape[1]
    for _ in range(max_rounds):
        changed = False
        for j in range(k):
            for i in range(k):
                if i == j:
                    continue
                bi, bj = B[:, i], B[:, j]
                p = round(float(bi @ bj) / float(bi @ bi))
                best, best_mu = float(np.max(np.abs(bj))), 0
                for mu in {p - 1, p, p + 1} - {0}:
                    val = float(np.max(np.abs(bj - mu * bi)))
                    if val < best * (1 - 1e-12):
                        best, best_mu = val, mu
                if best_mu:
                    B[:, j] = bj - best_mu * bi
                    U[:, j] = U[:, j] - int(best_mu) * U[:, i]
                    changed = True
        if not changed:
            break
    return B, U


def _reduce(m) -> tuple[np.ndarray, np.ndarray]:
    M = np.array(m, dtype=float)
    B, U = lll(M)
    B, U = sup_size_reduce(B, U)
    return M @ U.astype(float), U


def reduced_basis_with_transform(L: LatticeBasis) -> tuple[LatticeBasis, np.ndarray]:
    B, U = _reduce(L.basis)
    order = sorted(range(B.shape[1]), key=lambda j: (float(np.max(np.abs(B[:, j]))), j))
    B, U = B[:, order], U[:, order]
    for j in range(B.shape[1]):
        nz = np.flatnonzero(np.abs(B[:, j]) > 0)
        if nz.size and B[nz[0], j] < 0:
            B[:, j] = -B[:, j]
            U[:, j] = -U[:, j]
    # the orientation flip may be needed to keep det > 0 for unimodular input
    if L.unimodular and np.linalg.det(B) < 0:
        B[:, -1] = -B[:, -1]
        U[:, -1] = -U[:, -1]
    return LatticeBasis(B, unimodular=L.unimodular), U


def reduced_basis(L: LatticeBasis) -> LatticeBasis:
    """LLL (delta 0.99) then greedy sup-norm size reduction; columns sorted by norm."""
    return reduced_basis_with_transform(L)[0]


# ---------------------------------------------------------------- enumeration

def enumerate_ball(B: np.ndarray, radius: float, cap: int = ENUM_CAP,
                   half: bool = True) -> np.ndarray:
    """Integer y != 0 with |B y|_2 <= radius (times 1 + REL_TOL).

    Rows of the returned (count, k) int64 array.  With ``half`` only one of
    each +-y pair is kept: the last nonzero coordinate is positive.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[1]
    R = np.linalg.qr(B, mode="r")
    r2 = (radius * (1 + REL_TOL)) ** 2 + 1e-300
    out: list[np.ndarray] = []
    count = 0
    x = np.zeros(k, dtype=np.int64)

    def rec(i: int, partial: float, all_zero: bool):
        nonlocal count
        rem = r2 - partial
        if rem < 0:
            return
        center = -float(R[i, i + 1:] @ x[i + 1:]) / R[i, i]
        width = math.sqrt(rem) / abs(R[i, i])
        lo = math.ceil(center - width - 1e-9)
        hi = math.floor(center + width + 1e-9)
        if half and all_zero:
            lo = max(lo, 0)
        if hi < lo:
            return
        if i == 0:
            xs = np.arange(lo, hi + 1, dtype=np.int64)
            vals = partial + (R[0, 0] * (xs - center)) ** 2
            xs = xs[vals <= r2]
            if all_zero:
                xs = xs[xs != 0]
            if xs.size:
                count += xs.size
                if count > cap:
                    raise ResourceError(f"lattice enumeration exceeded {cap} points")
                block = np.repeat(x[None, :], xs.size, axis=0)
                block[:, 0] = xs
                out.append(block)
            return
        for xi in range(lo, hi + 1):
            x[i] = xi
            rec(i - 1, partial + (R[i, i] * (xi - center)) ** 2, all_zero and xi == 0)
        x[i] = 0

    rec(k - 1, 0.0, True)
    if not out:
        return np.zeros((0, k), dtype=np.int64)
    return np.concatenate(out)


def _sup_ball_points(M: np.ndarray, radius: float, cap: int = ENUM_CAP, half: bool = True):
    """(coeffs in M's basis, vectors, sup norms) of nonzero points with sup norm <= radius."""
    B, U = _reduce(M)
    d = M.shape[0]
    Y = enumerate_ball(B, math.sqrt(d) * radius, cap=cap, half=half)
    if Y.shape[0] == 0:
        return np.zeros((0, M.shape[1]), dtype=object), np.zeros((0, d)), np.zeros(0)
    C = (U @ Y.T.astype(object)).T  # exact integer coefficients
    V = C.astype(float) @ M.T
    norms = np.max(np.abs(V), axis=1)
    keep = norms <= radius * (1 + REL_TOL)
    return C[keep], V[keep], norms[keep]


def _sign_normalize(c) -> tuple[int, ...]:
    c = tuple(int(v) for v in c)
    for v in c:
        if v:
            return c if v > 0 else tuple(-w for w in c)
    return c


def _tie_key(c) -> tuple:
    # minimal l1 norm first, then the lexicographically largest normalized vector
    s = _sign_normalize(c)
    return (sum(abs(v) for v in s), tuple(-v for v in s))


def shortest_vector_full(L: LatticeBasis) -> tuple[np.ndarray, np.ndarray, float]:
    """(integer coefficients, vector, sup norm) of a shortest nonzero vector."""
    M = L.basis
    B, U = _reduce(M)
    r0 = float(np.min(_sup(B)))
    C, V, norms = _sup_ball_points(M, r0)
    if not len(norms):
        # reduction rounding can only lose the column itself; fall back to it
        j = int(np.argmin(_sup(B)))
        C = U[:, j].reshape(1, -1)
        V = B[:, j].reshape(1, -1)
        norms = _sup(V.T)
    m = float(norms.min())
    tied = [i for i in range(len(norms)) if norms[i] <= m * (1 + REL_TOL)]
    best = min(tied, key=lambda i: _tie_key(C[i]))
    c = np.array(_sign_normalize(C[best]), dtype=object)
    v = c.astype(float) @ M.T
    return c, v, float(np.max(np.abs(v)))


def shortest_vector(L: LatticeBasis) -> tuple[np.ndarray, float]:
    _, v, norm = shortest_vector_full(L)
    return v, norm


def in_K_eps(L: LatticeBasis, eps: float) -> bool:
    """True iff no nonzero lattice vector lies in the closed sup ball of radius eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return shortest_vector(L)[1] > eps


def _minima_of(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = M.shape[1]
    B, _ = _reduce(M)
    radius = float(np.max(_sup(B)))
    C, V, norms = _sup_ball_points(M, radius)
    order = sorted(range(len(norms)), key=lambda i: (norms[i], _tie_key(C[i])))
    # group near-equal norms so ties resolve by the coefficient key
    tracker = intmat.IncrementalRank()
    picked: list[int] = []
    for i in order:
        if tracker.add([int(v) for v in C[i]]):
            picked.append(i)
            if len(picked) == k:
                break
    if len(picked) < k:
        raise ResourceError("enumeration did not produce a full set of minima")
    coeffs = np.array([_sign_normalize(C[i]) for i in picked], dtype=object).T
    W = coeffs.astype(float).T @ M.T
    minima = np.max(np.abs(W), axis=1)
    # enforce the nondecreasing order exactly after recomputation
    minima = np.maximum.accumulate(minima)
    return minima, W.T, coeffs


def successive_minima(L: LatticeBasis, S: Optional[Sublattice] = None) -> MinimaProfile:
    """Sup-norm successive minima of L, or of the sublattice S of L."""
    if S is None:
        M = L.basis
        minima, W, coeffs = _minima_of(M)
    else:
        if S.dim != L.dim:
            raise ValueError("sublattice dimension does not match the lattice")
        Sv = S.vectors
        M = L.basis @ Sv.astype(float)
        minima, W, inner = _minima_of(M)
        coeffs = Sv @ inner
    return MinimaProfile(minima=minima, witnesses=W, coefficients=coeffs)


# ---------------------------------------------------------------- sublattices

def plucker(E: np.ndarray, exact: bool = False):
    """All k x k row minors of the d x k matrix E in lexicographic row order."""
    d, k = E.shape
    rows = list(itertools.combinations(range(d), k))
    if exact:
        F = [[Fraction(x) for x in row] for row in E.tolist()]
        return [_det_exact([F[r] for r in rs]) for rs in rows]
    idx = np.array(rows)
    return np.linalg.det(np.asarray(E, dtype=float)[idx])


def sublattice_covolume(S: Sublattice, L: LatticeBasis, exact: bool = False):
    """Sup norm of the wedge of the embedded generators of S.

    With ``exact`` the lattice basis entries are read as exact rationals
    (every double is one) and a Fraction is returned.
    """
    if S.dim != L.dim:
        raise ValueError("sublattice dimension does not match the lattice")
    if exact:
        Bq = [[Fraction(x) for x in row] for row in L.basis.tolist()]
        cols = S.columns()
        E = np.array([[sum((Bq[i][j] * c[j] for j in range(L.dim)), Fraction(0))
                       for c in cols] for i in range(L.dim)], dtype=object)
        return max(abs(m) for m in plucker(E, exact=True))
    E = L.basis @ S.vectors.astype(float)
    return float(np.max(np.abs(plucker(E))))


def is_primitive(S: Sublattice, L: Optional[LatticeBasis] = None) -> bool:
    """All elementary divisors of the coefficient matrix equal 1."""
    return intmat.minors_gcd(S.columns()) == 1


def saturation(S: Sublattice) -> Sublattice:
    """The primitive sublattice span_R(S) intersected with the ambient lattice."""
    return Sublattice(np.array(intmat.saturate(S.columns()), dtype=object).T)


def _canonical(cols) -> tuple[tuple[int, ...], Sublattice]:
    key = intmat.hnf_rows(cols)
    return key, Sublattice(np.array(key, dtype=object).T)


def _leq(a: float, b: float) -> bool:
    return a <= b * (1 + REL_TOL)


def _unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def _enum_rank1(L: LatticeBasis, rho: float, cap: int):
    C, V, norms = _sup_ball_points(L.basis, rho)
    found = {}
    for c in C:
        c = [int(v) for v in c]
        if math.gcd(*c) != 1:
            continue
        key, sub = _canonical([c])
        found[key] = sub
        if len(found) > cap:
            raise ResourceError(f"more than {cap} sublattices")
    return found


def _enum_corank1(L: LatticeBasis, rho: float, cap: int):
    # d(S) = |det B| * |B^{-T} u|_inf with u the primitive integer normal of S
    det = abs(L.det)
    dual = np.linalg.inv(L.basis).T
    C, V, norms = _sup_ball_points(dual, rho / det * (1 + 1e-6))
    found = {}
    for u in C:
        u = [int(v) for v in u]
        if math.gcd(*u) != 1:
            continue
        cols = intmat.right_kernel([u])
        key, sub = _canonical(cols)
        if _leq(sublattice_covolume(sub, L), rho):
            found[key] = sub
            if len(found) > cap:
                raise ResourceError(f"more than {cap} sublattices")
    return found


def _enum_general(L: LatticeBasis, k: int, rho: float, cap: int):
    """Successive-minima search bounded by Minkowski's second theorem.

    Euclidean minima mu_j of a k-dim S satisfy prod mu_j <= P with
    P = 2^k sqrt(C(d,k)) rho / V_k, and mu_1 >= lambda_1(L).  Vectors
    realising the minima span a finite-index subgroup of S whose saturation is S.
    """
    d = L.dim
    lam1 = shortest_vector(L)[1]
    P = 2 ** k * math.sqrt(math.comb(d, k)) * rho / _unit_ball_volume(k) * (1 + 1e-9)
    rmax = max((P / lam1 ** (j - 1)) ** (1.0 / (k - j + 1)) for j in range(1, k + 1))
    B, U = _reduce(L.basis)
    Y = enumerate_ball(B, rmax, half=True)
    if Y.shape[0] == 0:
        return {}
    C = (U @ Y.T.astype(object)).T
    V = C.astype(float) @ L.basis.T
    eu = np.linalg.norm(V, axis=1)
    order = np.argsort(eu, kind="stable")
    C = [[int(v) for v in C[i]] for i in order]
    eu = eu[order]
    found: dict = {}
    seen: set = set()
    tuples = 0

    def rec(start: int, chosen: list[int], prod: float, tracker_rows):
        nonlocal tuples
        j = len(chosen) + 1
        if j > k:
            tuples += 1
            if tuples > 50 * cap:
                raise ResourceError("sublattice search exceeded its tuple budget")
            cols = intmat.saturate([C[i] for i in chosen])
            key, sub = _canonical(cols)
            if key in seen:
                return
            seen.add(key)
            if _leq(sublattice_covolume(sub, L), rho):
                found[key] = sub
                if len(found) > cap:
                    raise ResourceError(f"more than {cap} sublattices")
            return
        limit = (P / prod) ** (1.0 / (k - j + 1))
        for i in range(start, len(C)):
            if eu[i] > limit:
                break
            t = intmat.IncrementalRank()
            t.rows = list(tracker_rows)
            if not t.add(C[i]):
                continue
            rec(i + 1, chosen + [i], prod * eu[i], t.rows)

    rec(0, [], 1.0, [])
    return found


def enumerate_primitive_sublattices(L: LatticeBasis, k: int, rho: float,
                                    cap: int = SUBLATTICE_CAP,
                                    method: str = "auto") -> list[Sublattice]:
    """All primitive rank-k sublattices with covolume <= rho, one HNF representative each.

    ``method`` is "auto", "general" or "dual" (k = d - 1 only).
    """
    d = L.dim
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in 1..{d}")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if method not in ("auto", "general", "dual"):
        raise ValueError(f"unknown method {method!r}")
    if k == d:
        if _leq(abs(L.det), rho):
            return [Sublattice(np.eye(d, dtype=int).astype(object))]
        return []
    if method == "dual" and k != d - 1:
        raise ValueError("dual method needs k = d - 1")
    if k == 1 and method != "general":
        found = _enum_rank1(L, rho, cap)
    elif k == d - 1 and method != "general":
        found = _enum_corank1(L, rho, cap)
    else:
        found = _enum_general(L, k, rho, cap)
    return [found[key] for key in sorted(found)]


# ---------------------------------------------------------------- batch oracle

def batch_box_min_norm(bases: np.ndarray, radius: float, cap: int = 2_000_000,
                       chunk: int = 4096) -> np.ndarray:
    """Minimal sup norm <= radius over nonzero points of many lattices, else inf.

    Brute force over the integer box |c_j| <= radius * |row_j(B^{-1})|_1, which
    contains every coefficient vector of a point in the sup ball.  Independent
    of the reduction pipeline, so it doubles as an oracle.
    """
    bases = np.asarray(bases, dtype=float)
    if bases.ndim == 2:
        bases = bases[None]
    K, d, _ = bases.shape
    inv = np.linalg.inv(bases)
    bounds = np.floor(radius * np.abs(inv).sum(axis=2) * (1 + REL_TOL) + 1e-9).astype(np.int64)
    box = bounds.max(axis=0)
    total = int(np.prod(2 * box + 1))
    if total > cap:
        raise ResourceError(f"coefficient box has {total} points, cap {cap}")
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in box], indexing="ij")
    coeffs = np.stack([g.ravel() for g in grids], axis=1)
    # drop zero and keep one of each +-pair
    nz = coeffs[np.any(coeffs != 0, axis=1)]
    first = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
    coeffs = nz[first > 0].astype(float)
    best = np.full(K, np.inf)
    lim = radius * (1 + REL_TOL)
    for s in range(0, len(coeffs), chunk):
        cb = coeffs[s:s + chunk]
        vecs = np.einsum("kij,mj->kmi", bases, cb)
        norms = np.max(np.abs(vecs), axis=2)
        norms = np.where(norms <= lim, norms, np.inf)
        best = np.minimum(best, norms.min(axis=1))
    return best
