"""Nondegenerate curves given by value/derivative closures plus a curvature bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Curve:
    """phi: [a, b] -> R^n.

    ``eval`` and ``deriv`` accept a scalar or a 1-d array of parameters and
    return arrays of shape (n,) or (len(s), n).  ``deriv2_bound`` bounds the
    sup norm of phi'' on the domain, and c1 <= |phi_i'| <= C1 there.
    """

    n: int
    domain: tuple[float, float]
    eval: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    deriv2_bound: float
    c1: float
    C1: float
    name: str = "curve"

    def __post_init__(self):
        a, b = self.domain
        if not b > a:
            raise ValueError(f"empty domain {self.domain}")
        if not 0 < self.c1 <= self.C1:
            raise ValueError("need 0 < c1 <= C1")

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def __call__(self, s):
        return self.eval(s)


class _Moment:
    # module-level callable so curves pickle for worker processes
    def __init__(self, n: int, order: int):
        self.n, self.order = n, order

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        k = np.arange(1, self.n + 1)
        if self.order == 0:
            out = s_arr[..., None] ** k
        else:
            out = k * s_arr[..., None] ** (k - 1)
        return out


class _Affine:
    def __init__(self, f: Callable, a: float, scale: float, order: int):
        self.f, self.a, self.scale, self.order = f, a, scale, order

    def __call__(self, u):
        val = self.f(self.a + self.scale * np.asarray(u, dtype=float))
        return val if self.order == 0 else self.scale * val


def moment_curve(n: int) -> Curve:
    """phi(s) = (s, s^2, ..., s^n) on [0.5, 1.5]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n + 1)
    c1 = float(np.min(k * 0.5 ** (k - 1)))
    C1 = float(np.max(k * 1.5 ** (k - 1)))
    d2 = float(np.max(k * (k - 1) * 1.5 ** np.maximum(k - 2, 0)))
    return Curve(n=n, domain=(0.5, 1.5), eval=_Moment(n, 0), deriv=_Moment(n, 1),
                 deriv2_bound=d2, c1=c1, C1=C1, name=f"moment{n}")


def reparametrize_unit(c: Curve) -> Curve:
    """Same image, parametrised over [0, 1]."""
    a, b = c.domain
    L = b - a
    return Curve(n=c.n, domain=(0.0, 1.0), eval=_Affine(c.eval, a, L, 0),
                 deriv=_Affine(c.deriv, a, L, 1), deriv2_bound=c.deriv2_bound * L * L,
                 c1=c.c1 * L, C1=c.C1 * L, name=c.name + "-unit")


@dataclass(frozen=True)
class A2Check:
    c1_measured: float
    C1_measured: float
    passed: bool


def check_A2(c: Curve, grid: int) -> A2Check:
    """Grid sweep of |phi_i'| widened by deriv2_bound * spacing / 2."""
    if grid < 2:
        raise ValueError("grid must have at least 2 points")
    s = np.linspace(c.domain[0], c.domain[1], grid)
    d = np.abs(np.asarray(c.deriv(s)).reshape(grid, c.n))
    widen = c.deriv2_bound * (s[1] - s[0]) / 2.0
    lo = float(d.min()) - widen
    hi = float(d.max()) + widen
    return A2Check(lo, hi, lo > 0)


def taylor_linearization_error(c: Curve, x: float, h: float) -> float:
    """sup norm of phi(x + h) - phi(x) - h phi'(x)."""
    a, b = c.domain
    if not (a <= x <= b and a <= x + h <= b):
        raise ValueError("[x, x + h] must lie inside the domain")
    diff = np.asarray(c.eval(x + h)) - np.asarray(c.eval(x)) - h * np.asarray(c.deriv(x))
    return float(np.max(np.abs(diff)))
