"""Weights, diagonal flows and unipotent embeddings in SL(n+1, R)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Weight:
    """An n-dimensional weight: nonnegative entries summing to 1."""

    r: tuple[float, ...]

    def __init__(self, r: Sequence[float]):
        vals = tuple(float(x) for x in np.atleast_1d(np.asarray(r, dtype=float)))
        if not vals:
            raise ValueError("weight must have at least one entry")
        if any(not math.isfinite(x) or x < 0 for x in vals):
            raise ValueError(f"weight entries must be finite and nonnegative: {vals}")
        if abs(math.fsum(vals) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weight entries must sum to 1, got {math.fsum(vals)!r}")
        object.__setattr__(self, "r", vals)

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.r)

    def is_standard(self) -> bool:
        """Sorted nonincreasing with a positive last entry."""
        return all(a >= b for a, b in zip(self.r, self.r[1:])) and self.r[-1] > 0

    def require_standard(self) -> None:
        if not self.is_standard():
            raise ValueError(f"weight {self.r} must be nonincreasing with r_n > 0")

    def __len__(self) -> int:
        return len(self.r)


@dataclass(frozen=True)
class FlowParams:
    """Subdivision factor R, depth parameter m and the derived b, kappa, lambda_i."""

    R: int
    m: int
    weight: Weight
    b: float = field(init=False)
    log_b: float = field(init=False)
    kappa: float = field(init=False)
    lam: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if int(self.R) != self.R or self.R < 2:
            raise ValueError(f"R must be an integer >= 2, got {self.R!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        r1 = self.weight.r[0]
        log_b = math.log(self.R) / (1.0 + r1)
        object.__setattr__(self, "log_b", log_b)
        object.__setattr__(self, "b", math.exp(log_b))
        object.__setattr__(self, "kappa", float(self.R) ** (-self.m))
        object.__setattr__(self, "lam", tuple((1 + ri) / (1 + r1) for ri in self.weight.r))

    def bpow(self, e) -> np.ndarray | float:
        """b ** e computed as exp(e * ln b)."""
        return np.exp(np.asarray(e, dtype=float) * self.log_b) if np.ndim(e) else math.exp(e * self.log_b)


def _diag_exp(exponents: Sequence[float]) -> np.ndarray:
    ex = np.asarray(exponents, dtype=float)
    if np.any(np.abs(ex) > 700):
        raise OverflowError("flow exponent beyond double range")
    return np.diag(np.exp(ex))


def flow_a(w: Weight, t: float) -> np.ndarray:
    """diag(e^{r_1 t}, ..., e^{r_n t}, e^{-t})."""
    return _diag_exp([ri * t for ri in w.r] + [-t])


def flow_d(w: Weight, t: float) -> np.ndarray:
    """diag(e^t, e^{-r_1 t}, ..., e^{-r_n t})."""
    return _diag_exp([t] + [-ri * t for ri in w.r])


def flow_g(p: FlowParams, w: Weight, q: float) -> np.ndarray:
    """diag(b^q, b^{-r_1 q}, ..., b^{-r_n q})."""
    if w != p.weight:
        raise ValueError("flow parameters were built for a different weight")
    return _diag_exp([q * p.log_b] + [-ri * q * p.log_b for ri in w.r])


def aux_flow(exponents: Sequence[float], t: float, b: float) -> np.ndarray:
    """diag(b^{e_0 t}, ..., b^{e_n t}) for exponents summing to zero."""
    ex = np.asarray(exponents, dtype=float)
    if abs(math.fsum(ex)) > 1e-12:
        raise ValueError(f"exponents must sum to 0, got {math.fsum(ex)!r}")
    return _diag_exp(ex * t * math.log(b))


def g_eta_exponents(n: int, eta: float) -> list[float]:
    return [-eta] + [eta / n] * n


def xi_exponents(w: Weight, n1: int) -> list[float]:
    """Exponents of xi(t): b^{-beta t} on w+, 1 below n1, b^{r_j t} from n1 on.

    ``n1`` is 1-based as in the weight indexing; beta = sum_{j >= n1} r_j.
    """
    if not 1 < n1 <= w.n:
        raise ValueError(f"split index n1 must lie in 2..{w.n}")
    beta = math.fsum(w.r[n1 - 1:])
    return [-beta] + [0.0] * (n1 - 1) + list(w.r[n1 - 1:])


def g_prime_exponents(w: Weight, n1: int) -> list[float]:
    """Exponents of xi(t) g_r(t): b^{chi t}, b^{-r_j t} for j < n1, then 1."""
    if not 1 < n1 <= w.n:
        raise ValueError(f"split index n1 must lie in 2..{w.n}")
    chi = math.fsum(w.r[:n1 - 1])
    return [chi] + [-x for x in w.r[:n1 - 1]] + [0.0] * (w.n - n1 + 1)


def g_eta(n: int, eta: float, t: float, b: float) -> np.ndarray:
    return aux_flow(g_eta_exponents(n, eta), t, b)


def xi_flow(w: Weight, n1: int, t: float, b: float) -> np.ndarray:
    return aux_flow(xi_exponents(w, n1), t, b)


def g_prime(w: Weight, n1: int, t: float, b: float) -> np.ndarray:
    return aux_flow(g_prime_exponents(w, n1), t, b)


def unipotent_U(x) -> np.ndarray:
    """[[1, x^T], [0, I_n]]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    u = np.eye(n + 1)
    u[0, 1:] = x
    return u


def unipotent_V(x) -> np.ndarray:
    """[[I_n, x], [0, 1]]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    v = np.eye(n + 1)
    v[:n, n] = x
    return v


def rotation_frame(x, threshold: float = 1e-6) -> np.ndarray:
    """z(k) = 1 (+) k with k in SO(n) and k e_1 = x / |x|_2 (k = sign(x) when n = 1).

    k is completed by Gram-Schmidt against e_1, ..., e_n in order, skipping
    candidates whose residual norm falls below ``threshold``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ValueError("rotation frame of the zero vector")
    cols = [x / nx]
    for j in range(n):
        if len(cols) == n:
            break
        c = np.zeros(n)
        c[j] = 1.0
        for _ in range(2):
            for q in cols:
                c = c - (q @ c) * q
        nc = float(np.linalg.norm(c))
        if nc < threshold:
            continue
        cols.append(c / nc)
    k = np.column_stack(cols)
    # SO(1) is trivial, so for n = 1 and x < 0 the frame is k = -1 in O(1)
    if n > 1 and np.linalg.det(k) < 0:
        k[:, -1] = -k[:, -1]
    z = np.eye(n + 1)
    z[1:, 1:] = k
    return z


def xi_x(x, r: float) -> np.ndarray:
    """The diagonal element of SL(2, x) corresponding to diag(r, 1/r)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    xi1 = np.eye(n + 1)
    xi1[0, 0] = r
    xi1[1, 1] = 1.0 / r
    z = rotation_frame(x)
    return z @ xi1 @ z.T


def conjugate_unipotent_by_flow(p: FlowParams, w: Weight, t: float, y) -> np.ndarray:
    """y' with g_r(t) U(y) g_r(-t) = U(y'), namely y'_i = b^{(1 + r_i) t} y_i."""
    if w != p.weight:
        raise ValueError("flow parameters were built for a different weight")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ex = (1.0 + w.array) * t * p.log_b
    if np.any(ex > 700):
        raise OverflowError("conjugation factor beyond double range")
    return np.exp(ex) * y
