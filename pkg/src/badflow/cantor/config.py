"""Frozen parameters of one run of the interval-survival construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from ..curve import Curve, moment_curve
from ..flows import FlowParams, Weight

CURVES = {"moment": moment_curve}


def make_curve(name: str, n: int) -> Curve:
    if name not in CURVES:
        raise ValueError(f"unknown curve {name!r}; choose from {sorted(CURVES)}")
    return CURVES[name](n)


@dataclass(frozen=True)
class ConstructionConfig:
    """Everything the construction depends on.

    ``l_min``/``l_max``/``l_generic`` stand in for the proof's enormous
    scale thresholds.  ``l_max`` defaults to floor(2 eta' q), ``l_generic``
    to ``l_min``.  Nodes at levels q <= ``q_small`` all go to bucket p = 0.
    """

    weight: Weight
    R: int
    m: int
    curve_name: str = "moment"
    rho: float = 0.25
    rho1: float = 0.05
    depth: int = 4
    eta: Optional[float] = None
    l_min: int = 1
    l_max: Optional[int] = None
    l_generic: Optional[int] = None
    q_small: int = 0
    grid: int = 9              # initial samples per node, endpoints included
    refine_rounds: int = 6     # each round multiplies the samples by 4
    max_nodes: int = 10_000_000
    sublattice_cap: int = 100_000
    curve: Curve = field(default=None, compare=False, repr=False)
    flow: FlowParams = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        self.weight.require_standard()
        if self.curve is None:
            object.__setattr__(self, "curve", make_curve(self.curve_name, self.weight.n))
        if self.curve.n != self.weight.n:
            raise ValueError("curve dimension does not match the weight")
        object.__setattr__(self, "flow", FlowParams(self.R, self.m, self.weight))
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.rho1 < 1:
            raise ValueError("rho1 must lie in (0, 1)")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.l_min < 1:
            raise ValueError("l_min must be >= 1")
        if self.grid < 2 or self.refine_rounds < 0:
            raise ValueError("grid needs >= 2 samples and refine_rounds >= 0")

    # derived quantities -------------------------------------------------
    @property
    def n(self) -> int:
        return self.weight.n

    @property
    def kappa(self) -> float:
        return self.flow.kappa

    @property
    def b(self) -> float:
        return self.flow.b

    @property
    def log_b(self) -> float:
        return self.flow.log_b

    @property
    def eta_value(self) -> float:
        return self.eta if self.eta is not None else 1.0 / (100 * self.n ** 2)

    @property
    def eta_prime(self) -> float:
        return self.eta_value / (1 + self.weight.r[0])

    @property
    def domain(self) -> tuple[float, float]:
        return self.curve.domain

    @property
    def length(self) -> float:
        return self.curve.length

    def l_generic_value(self) -> int:
        return self.l_generic if self.l_generic is not None else self.l_min

    def l_max_for(self, q: int) -> int:
        if self.l_max is not None:
            return self.l_max
        return int(math.floor(2 * self.eta_prime * q + 1e-12))

    def node_length(self, q: int) -> float:
        return self.length / float(self.R) ** q

    def node_interval(self, q: int, index) -> tuple:
        a = self.domain[0]
        h = self.node_length(q)
        return a + h * index, a + h * (index + 1)

    def with_(self, **kw) -> "ConstructionConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "curve": self.curve_name, "weight": list(self.weight.r),
            "R": self.R, "m": self.m, "kappa": self.kappa, "b": self.b,
            "lambda": list(self.flow.lam), "rho": self.rho, "rho1": self.rho1,
            "depth": self.depth, "eta": self.eta_value, "eta_prime": self.eta_prime,
            "l_min": self.l_min, "l_max": self.l_max, "l_generic": self.l_generic_value(),
            "q_small": self.q_small, "grid": self.grid, "refine_rounds": self.refine_rounds,
            "domain": list(self.domain),
        }


def frozen_config(**overrides) -> ConstructionConfig:
    """The desk-scale regression configuration: n = 2, moment curve, R = 16."""
    base = dict(weight=Weight([0.5, 0.5]), R=16, m=1, rho=0.25, depth=4)
    base.update(overrides)
    return ConstructionConfig(**base)


def small_config(**overrides) -> ConstructionConfig:
    """R = 4, rho = 1/2: the configuration used by the brute-force oracles."""
    base = dict(weight=Weight([0.5, 0.5]), R=4, m=1, rho=0.5, depth=3)
    base.update(overrides)
    return ConstructionConfig(**base)
