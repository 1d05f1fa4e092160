"""Certified maxima of s -> |g_r(q) U(phi(s)) v| over an interval.

U(y) acts affinely on every exterior power, so each coordinate of the flowed
multivector is scale_J (v_J + sum_i phi_i(s) D_iJ) and is Lipschitz with
constant scale_J C1 sum_i |D_iJ|.  A branch-and-bound over subintervals turns
samples into a two-sided enclosure of the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..curve import Curve
from ..exterior import MultiVector, subsets, unipotent_derivations
from .config import ConstructionConfig


@dataclass(frozen=True)
class Enclosure:
    lower: float
    upper: float
    certified: bool

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


def grade_scale(weight_r, log_b: float, q: float, grade: int) -> np.ndarray:
    """Diagonal of g_r(q) acting on the grade-k exterior power."""
    ex = np.array([1.0] + [-r for r in weight_r]) * q * log_b
    return np.array([np.exp(sum(ex[j] for j in J)) for J in subsets(len(ex), grade)])


@dataclass(frozen=True)
class FlowedMultivector:
    """Precomputed data for s -> g U(phi(s)) v."""

    comps: np.ndarray   # (C,)
    D: np.ndarray       # (n, C)
    scale: np.ndarray   # (C,)
    lipschitz: float    # max of lip_comps
    lip_comps: np.ndarray = None   # (C,) per-coordinate Lipschitz constants

    @classmethod
    def build(cls, v: MultiVector, cfg: ConstructionConfig, q: float) -> "FlowedMultivector":
        vf = v.to_float()
        D = np.asarray(unipotent_derivations(vf), dtype=float)
        scale = grade_scale(cfg.weight.r, cfg.log_b, q, v.grade)
        lc = scale * np.abs(D).sum(axis=0) * cfg.curve.C1 if D.size else np.zeros_like(scale)
        return cls(np.asarray(vf.coeffs, dtype=float), D, scale, float(np.max(lc)), lc)

    def coords(self, curve: Curve, s: np.ndarray) -> np.ndarray:
        """|coordinates| of g U(phi(s)) v, shape (len(s), C)."""
        phi = np.asarray(curve.eval(s), dtype=float).reshape(len(s), -1)
        vals = np.repeat(self.comps[None, :], len(s), axis=0)
        for i in range(self.D.shape[0]):
            vals = vals + phi[:, i:i + 1] * self.D[i][None, :]
        return np.abs(vals * self.scale[None, :])

    def norms(self, curve: Curve, s: np.ndarray) -> np.ndarray:
        return np.max(self.coords(curve, s), axis=1)


def window_max(fm: FlowedMultivector, curve: Curve, lo: float, hi: float,
               threshold: Optional[float] = None, tol: Optional[float] = None,
               max_evals: int = 1 << 16, initial: int = 17) -> Enclosure:
    """Enclosure of max_{s in [lo, hi]} |g U(phi(s)) v|.

    With ``threshold`` the search stops as soon as the comparison with it is
    decided.  ``tol`` is the target enclosure width.
    """
    if hi < lo:
        raise ValueError("empty interval")
    if tol is None:
        tol = 1e-9 * (threshold if threshold else 1.0)
    if hi == lo or fm.lipschitz == 0.0:
        v = float(fm.norms(curve, np.array([lo]))[0])
        return Enclosure(v, v, True)
    # cell bounds are taken per coordinate, so constant coordinates add no slack
    Lc = fm.lip_comps[None, :]
    s = np.linspace(lo, hi, initial)
    c = fm.coords(curve, s)
    lb = float(c.max())
    left, right, fl, fr = s[:-1], s[1:], c[:-1], c[1:]
    done_ub = -np.inf
    evals = initial
    while True:
        ub = np.max(np.maximum(fl, fr) + Lc * (right - left)[:, None] / 2, axis=1)
        glob = max(done_ub, float(ub.max()) if ub.size else -np.inf, lb)
        if threshold is not None and (lb >= threshold or glob <= threshold):
            return Enclosure(lb, glob, True)
        if glob - lb <= tol:
            return Enclosure(lb, glob, True)
        active = ub > lb + tol
        if np.any(~active):
            done_ub = max(done_ub, float(ub[~active].max()))
        left, right, fl, fr = left[active], right[active], fl[active], fr[active]
        if evals + left.size > max_evals:
            return Enclosure(lb, glob, False)
        mid = 0.5 * (left + right)
        cmid = fm.coords(curve, mid)
        evals += mid.size
        lb = max(lb, float(cmid.max()))
        left, right = np.concatenate([left, mid]), np.concatenate([mid, right])
        fl, fr = np.concatenate([fl, cmid]), np.concatenate([cmid, fr])


def certified_max_norm(a, q: float, interval: tuple[float, float],
                       cfg: ConstructionConfig, tol: Optional[float] = None) -> Enclosure:
    """Enclosure of max over the interval of |g_r(q) U(phi(s)) a| for an integer vector a.

    Refined until the width is below 0.01 kappa unless ``tol`` says otherwise.
    """
    a = np.asarray(a)
    if a.shape != (cfg.n + 1,):
        raise ValueError(f"a must have {cfg.n + 1} entries")
    if not np.any(a != 0):
        raise ValueError("a must be nonzero")
    fm = FlowedMultivector.build(MultiVector.from_vector(a.astype(float)), cfg, q)
    return window_max(fm, cfg.curve, float(interval[0]), float(interval[1]),
                      tol=0.01 * cfg.kappa if tol is None else tol)


def clip_window(cfg: ConstructionConfig, center: float, half: float) -> tuple[float, float]:
    a, b = cfg.domain
    return max(a, center - half), min(b, center + half)
