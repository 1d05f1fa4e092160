"""Exterior powers of R^{n+1} with the sup norm.

Index 0 is the ``w+`` direction; indices 1..n span the complementary
subspace W.  A grade-k multivector stores its components in a dense array
ordered by the combinatorial rank of the index subset, i.e. the order of
``itertools.combinations(range(dim), k)``.

Two numeric modes are supported: float64 arrays for sweeps, and object
arrays of ``fractions.Fraction`` (or ints) for exact checks.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np


class GradeError(ValueError):
    """Raised when a wedge product would exceed the top grade."""


@lru_cache(maxsize=None)
def subsets(dim: int, grade: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(dim), grade))


@lru_cache(maxsize=None)
def subset_index(dim: int, grade: int) -> dict[tuple[int, ...], int]:
    return {s: i for i, s in enumerate(subsets(dim, grade))}


def _merge_sign(s: Sequence[int], t: Sequence[int]) -> int:
    # sign of the permutation sorting the concatenation s + t
    inversions = 0
    for a in s:
        for b in t:
            if a > b:
                inversions += 1
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_table(dim: int, gi: int, gj: int):
    """Rows (i, j, k, sign): component i of u times j of v lands on k."""
    idx = subset_index(dim, gi + gj)
    rows = []
    for i, s in enumerate(subsets(dim, gi)):
        for j, t in enumerate(subsets(dim, gj)):
            if set(s) & set(t):
                continue
            k = idx[tuple(sorted(s + t))]
            rows.append((i, j, k, _merge_sign(s, t)))
    return tuple(rows)


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


class MultiVector:
    """Element of the grade-``grade`` exterior power of R^dim."""

    __slots__ = ("dim", "grade", "coeffs")

    def __init__(self, dim: int, grade: int, coeffs):
        if not 0 <= grade <= dim:
            raise GradeError(f"grade {grade} outside 0..{dim}")
        size = len(subsets(dim, grade))
        arr = np.asarray(coeffs)
        if arr.dtype != object:
            arr = arr.astype(float)
        if arr.shape != (size,):
            raise ValueError(f"expected {size} components, got shape {arr.shape}")
        if arr.dtype != object and not np.all(np.isfinite(arr)):
            raise ValueError("multivector components must be finite")
        self.dim = dim
        self.grade = grade
        self.coeffs = arr

    # constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, grade: int, exact: bool = False) -> "MultiVector":
        size = len(subsets(dim, grade))
        if exact:
            return cls(dim, grade, np.array([Fraction(0)] * size, dtype=object))
        return cls(dim, grade, np.zeros(size))

    @classmethod
    def scalar(cls, dim: int, value=1.0) -> "MultiVector":
        dtype = object if isinstance(value, (Fraction, int)) and not isinstance(value, bool) else float
        return cls(dim, 0, np.array([value], dtype=dtype))

    @classmethod
    def basis(cls, dim: int, indices: Iterable[int], exact: bool = False) -> "MultiVector":
        """The blade e_{i1} ^ ... ^ e_{ik}, with the sign of the given order."""
        indices = tuple(indices)
        if len(set(indices)) != len(indices):
            return cls.zero(dim, len(indices), exact)
        key = tuple(sorted(indices))
        perm_sign = 1
        for a, b in itertools.combinations(indices, 2):
            if a > b:
                perm_sign = -perm_sign
        out = cls.zero(dim, len(indices), exact)
        one = Fraction(perm_sign) if exact else float(perm_sign)
        out.coeffs[subset_index(dim, len(indices))[key]] = one
        return out

    @classmethod
    def from_vector(cls, v) -> "MultiVector":
        arr = np.asarray(v)
        if arr.dtype != object:
            arr = arr.astype(float)
        return cls(arr.shape[0], 1, arr.copy())

    @classmethod
    def from_components(cls, dim: int, grade: int, comps: Mapping[tuple[int, ...], object],
                        exact: bool = False) -> "MultiVector":
        out = cls.zero(dim, grade, exact)
        for key, val in comps.items():
            key = tuple(key)
            if len(key) != grade:
                raise ValueError(f"key {key} does not have cardinality {grade}")
            out = out + val * cls.basis(dim, key, exact)
        return out

    @classmethod
    def blade(cls, vectors: Sequence) -> "MultiVector":
        """Wedge of a sequence of vectors (columns or rows of ints/floats)."""
        vecs = [cls.from_vector(v) for v in vectors]
        out = vecs[0]
        for v in vecs[1:]:
            out = wedge(out, v)
        return out

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "MultiVector") -> None:
        if (self.dim, self.grade) != (other.dim, other.grade):
            raise ValueError("multivectors of different shape")

    def __add__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        return MultiVector(self.dim, self.grade, self.coeffs + other.coeffs)

    def __sub__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        return MultiVector(self.dim, self.grade, self.coeffs - other.coeffs)

    def __neg__(self) -> "MultiVector":
        return MultiVector(self.dim, self.grade, -self.coeffs)

    def __mul__(self, scalar) -> "MultiVector":
        return MultiVector(self.dim, self.grade, self.coeffs * scalar)

    __rmul__ = __mul__

    def __xor__(self, other: "MultiVector") -> "MultiVector":
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiVector):
            return NotImplemented
        return (self.dim, self.grade) == (other.dim, other.grade) and bool(
            np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash((self.dim, self.grade, tuple(self.coeffs.tolist())))

    def __repr__(self) -> str:
        terms = self.components()
        body = ", ".join(f"{k}: {v}" for k, v in terms.items()) or "0"
        return f"MultiVector(dim={self.dim}, grade={self.grade}, {{{body}}})"

    # views ----------------------------------------------------------------

    def components(self) -> dict[tuple[int, ...], object]:
        """Nonzero components keyed by sorted index subsets."""
        return {s: c for s, c in zip(subsets(self.dim, self.grade), self.coeffs) if c != 0}

    def __getitem__(self, key: tuple[int, ...]):
        return self.coeffs[subset_index(self.dim, self.grade)[tuple(key)]]

    @property
    def exact(self) -> bool:
        return _is_exact(self.coeffs)

    def to_float(self) -> "MultiVector":
        return MultiVector(self.dim, self.grade, self.coeffs.astype(float))

    def to_exact(self) -> "MultiVector":
        vals = [c if isinstance(c, Fraction) else Fraction(c) for c in self.coeffs.tolist()]
        return MultiVector(self.dim, self.grade, np.array(vals, dtype=object))

    def norm(self) -> float:
        return sup_norm(self)


def wedge(u: MultiVector, v: MultiVector) -> MultiVector:
    if u.dim != v.dim:
        raise ValueError("wedge of multivectors in different spaces")
    grade = u.grade + v.grade
    if grade > u.dim:
        raise GradeError(f"grade {u.grade} + {v.grade} exceeds {u.dim}")
    exact = u.exact or v.exact
    out = MultiVector.zero(u.dim, grade, exact)
    acc = out.coeffs
    uc, vc = u.coeffs, v.coeffs
    for i, j, k, sign in _wedge_table(u.dim, u.grade, v.grade):
        a, b = uc[i], vc[j]
        if a != 0 and b != 0:
            acc[k] = acc[k] + sign * a * b
    return out


def sup_norm(v: MultiVector):
    if v.coeffs.size == 0:
        return 0.0
    if v.exact:
        return max(abs(c) for c in v.coeffs.tolist())
    return float(np.max(np.abs(v.coeffs)))


# -- group action ---------------------------------------------------------


def _det_exact(m: list[list]) -> Fraction:
    # Bareiss-free fraction elimination; matrices here are at most 9x9
    a = [[Fraction(x) for x in row] for row in m]
    k = len(a)
    det = Fraction(1)
    for c in range(k):
        piv = next((r for r in range(c, k) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, k):
            f = a[r][c] / a[c][c]
            if f:
                for cc in range(c, k):
                    a[r][cc] -= f * a[c][cc]
    return det


def compound_matrix(g, grade: int) -> np.ndarray:
    """Matrix of the induced action on the grade-``grade`` exterior power.

    Entry (S, T) is the minor det g[S, T].
    """
    g_arr = np.asarray(g)
    dim = g_arr.shape[0]
    subs = subsets(dim, grade)
    if grade == 0:
        return np.ones((1, 1), dtype=g_arr.dtype if g_arr.dtype == object else float)
    if g_arr.dtype == object:
        rows = []
        for s in subs:
            rows.append([_det_exact([[g_arr[i, j] for j in t] for i in s]) for t in subs])
        return np.array(rows, dtype=object)
    idx = np.array(subs)
    blocks = g_arr[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(blocks.astype(float))


def act(g, v: MultiVector) -> MultiVector:
    """The induced action g(v1 ^ ... ^ vk) = (g v1) ^ ... ^ (g vk)."""
    g_arr = np.asarray(g)
    if g_arr.shape != (v.dim, v.dim):
        raise ValueError(f"matrix shape {g_arr.shape} does not match dim {v.dim}")
    if v.grade == 0:
        return MultiVector(v.dim, 0, v.coeffs.copy())
    if v.grade == 1:
        if v.exact or g_arr.dtype == object:
            gm = g_arr.astype(object)
            return MultiVector(v.dim, 1, gm.dot(v.coeffs.astype(object)))
        return MultiVector(v.dim, 1, g_arr.astype(float) @ v.coeffs)
    exact = v.exact or g_arr.dtype == object
    comp = compound_matrix(g_arr.astype(object) if exact else g_arr, v.grade)
    if exact:
        return MultiVector(v.dim, v.grade, comp.dot(v.coeffs.astype(object)))
    return MultiVector(v.dim, v.grade, comp @ v.coeffs)


# -- w+ / W splitting -----------------------------------------------------


def w_plus(dim: int, exact: bool = False) -> MultiVector:
    return MultiVector.basis(dim, (0,), exact)


def split_wplus(v: MultiVector) -> tuple[MultiVector, MultiVector]:
    """Write v = w+ ^ head + tail with head, tail supported on indices 1..n.

    Since 0 is the smallest index, w+ ^ e_T = e_{{0} u T} with sign +1, so the
    head simply collects the components on subsets containing 0.
    """
    if v.grade < 1:
        raise GradeError("split needs grade >= 1")
    dim = v.dim
    head = MultiVector.zero(dim, v.grade - 1, v.exact)
    tail = MultiVector.zero(dim, v.grade, v.exact)
    head_idx = subset_index(dim, v.grade - 1)
    for pos, s in enumerate(subsets(dim, v.grade)):
        c = v.coeffs[pos]
        if s[0] == 0:
            head.coeffs[head_idx[s[1:]]] = c
        else:
            tail.coeffs[pos] = c
    return head, tail


# -- affine dependence on the unipotent parameter --------------------------


def unipotent_derivations(v: MultiVector) -> np.ndarray:
    """Rows D_i v for i = 1..n, where U(y) v = v + sum_i y_i D_i v.

    U(y) = I + N(y) with N(y) e_i = y_i e_0; N extends to the exterior power
    as a derivation whose square vanishes, so the action is affine in y.
    """
    dim, grade = v.dim, v.grade
    subs = subsets(dim, grade)
    idx = subset_index(dim, grade)
    exact = v.exact
    out = np.zeros((dim - 1, len(subs)), dtype=object if exact else float)
    if exact:
        out[:] = Fraction(0)
    for pos, s in enumerate(subs):
        c = v.coeffs[pos]
        if c == 0 or s[0] == 0:
            continue
        for slot, i in enumerate(s):
            # replace e_i by e_0 at position ``slot``; moving e_0 to the front
            # passes ``slot`` smaller indices
            new = (0,) + s[:slot] + s[slot + 1:]
            sign = -1 if slot % 2 else 1
            out[i - 1, idx[new]] += sign * c
    return out
