"""Exact integer matrix routines: Hermite form, kernels, saturation, minors."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

Matrix = list[list[int]]


def _as_rows(m) -> Matrix:
    return [[int(x) for x in row] for row in m]


def transpose(m: Matrix) -> Matrix:
    return [list(col) for col in zip(*m)] if m else []


def echelon_with_transform(a) -> tuple[Matrix, Matrix, int]:
    """Row Hermite normal form E = V A with V unimodular.

    Returns (E, V, rank).  The first ``rank`` rows of E are nonzero, pivots
    are positive and entries above each pivot are reduced into [0, pivot).
    """
    A = _as_rows(a)
    rows = len(A)
    cols = len(A[0]) if rows else 0
    V = [[int(i == j) for j in range(rows)] for i in range(rows)]
    r = 0
    pivots = []
    for c in range(cols):
        if r == rows:
            break
        while True:
            nz = [i for i in range(r, rows) if A[i][c] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(A[i][c]))
            A[r], A[p] = A[p], A[r]
            V[r], V[p] = V[p], V[r]
            done = True
            for i in range(r + 1, rows):
                if A[i][c]:
                    f = A[i][c] // A[r][c]
                    A[i] = [x - f * y for x, y in zip(A[i], A[r])]
                    V[i] = [x - f * y for x, y in zip(V[i], V[r])]
                    if A[i][c]:
                        done = False
            if done:
                break
        if all(A[i][c] == 0 for i in range(r, rows)):
            continue
        if A[r][c] < 0:
            A[r] = [-x for x in A[r]]
            V[r] = [-x for x in V[r]]
        piv = A[r][c]
        for i in range(r):
            f = A[i][c] // piv
            if f:
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
                V[i] = [x - f * y for x, y in zip(V[i], V[r])]
        pivots.append(c)
        r += 1
    return A, V, r


def hnf_rows(a) -> tuple[tuple[int, ...], ...]:
    """Canonical basis (row HNF) of the lattice spanned by the rows of ``a``."""
    E, _, rank = echelon_with_transform(a)
    return tuple(tuple(row) for row in E[:rank])


def left_kernel(a) -> Matrix:
    """Basis rows v of the integer lattice {v : v A = 0}."""
    _, V, rank = echelon_with_transform(a)
    return V[rank:]


def right_kernel(a) -> Matrix:
    """Basis columns (returned as rows) of {c : A c = 0} over the integers."""
    return left_kernel(transpose(_as_rows(a)))


def saturate(columns: Sequence[Sequence[int]]) -> Matrix:
    """Basis vectors (as rows) of span_R(columns) intersected with Z^d."""
    cols = _as_rows(columns)
    a = transpose(cols)  # d x k, vectors as columns
    k_rows = left_kernel(a)
    d = len(a)
    if not k_rows:
        return [[int(i == j) for j in range(d)] for i in range(d)]
    return right_kernel(k_rows)


def det_int(m) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    a = _as_rows(m)
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def maximal_minors(vectors: Sequence[Sequence[int]]) -> list[int]:
    """All k x k minors of the d x k matrix whose columns are ``vectors``."""
    vecs = _as_rows(vectors)
    k = len(vecs)
    d = len(vecs[0])
    return [det_int([[v[i] for v in vecs] for i in rows])
            for rows in itertools.combinations(range(d), k)]


def minors_gcd(vectors: Sequence[Sequence[int]]) -> int:
    g = 0
    for m in maximal_minors(vectors):
        g = math.gcd(g, m)
    return g


def rank_exact(vectors: Sequence[Sequence]) -> int:
    rows = [[Fraction(x) for x in v] for v in vectors]
    if not rows:
        return 0
    rank = 0
    cols = len(rows[0])
    for c in range(cols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(rank + 1, len(rows)):
            f = rows[i][c] / rows[rank][c]
            if f:
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


class IncrementalRank:
    """Tracks an echelon basis so independence tests cost O(k d)."""

    def __init__(self):
        self.rows: list[tuple[int, list[Fraction]]] = []

    def reduce(self, v) -> list[Fraction]:
        w = [Fraction(x) for x in v]
        for piv, row in self.rows:
            if w[piv]:
                f = w[piv] / row[piv]
                w = [x - f * y for x, y in zip(w, row)]
        return w

    def independent(self, v) -> bool:
        return any(self.reduce(v))

    def add(self, v) -> bool:
        w = self.reduce(v)
        piv = next((i for i, x in enumerate(w) if x), None)
        if piv is None:
            return False
        self.rows.append((piv, w))
        return True

    def __len__(self) -> int:
        return len(self.rows)
