"""Badness tests for weighted simultaneous approximation and the orbit correspondence.

Vectors x are held exactly (Fraction) when they are rational and as
high-precision mpmath numbers otherwise.  Every scan runs a vectorised double
pass with a rigorous rounding-error envelope and then re-evaluates the
surviving candidates at WORK_DPS digits, so reported constants are exact to
double precision even for Liouville-type inputs.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import mpmath
import numpy as np

from .errors import ResourceError
from .flows import Weight
from .lattice import enumerate_ball, lll

WORK_DPS = 160
Real = Union[Fraction, mpmath.mpf]

# ---------------------------------------------------------------- parsing


def liouville(K: int) -> Fraction:
    """sum_{k=1}^{K} 10^{-k!} as an exact rational."""
    if K < 1:
        raise ValueError("K must be positive")
    return sum((Fraction(1, 10 ** math.factorial(k)) for k in range(1, K + 1)), Fraction(0))


def _to_mp(v: Real) -> mpmath.mpf:
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


def _lift(f: Callable) -> Callable:
    def g(*args):
        with mpmath.workdps(WORK_DPS):
            return f(*[_to_mp(a) for a in args])
    return g


_FUNCS: dict[str, Callable] = {
    "sqrt": _lift(mpmath.sqrt),
    "cbrt": _lift(mpmath.cbrt),
    "exp": _lift(mpmath.exp),
    "log": _lift(mpmath.log),
    "root": _lift(lambda a, k: mpmath.root(a, int(k))),
    "liouville": lambda k: liouville(int(k)),
}
_CONSTS = {"pi": mpmath.pi, "e": mpmath.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv}


def _binop(op, a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        if op is operator.truediv and b == 0:
            raise ZeroDivisionError("division by zero in expression")
        return op(a, b)
    with mpmath.workdps(WORK_DPS):
        return op(_to_mp(a), _to_mp(b))


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        # decimal literals are read as the rationals they spell
        return Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _binop(_BINOPS[type(node.op)], _eval(node.left), _eval(node.right))
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
        a, b = _eval(node.left), _eval(node.right)
        if isinstance(a, Fraction) and isinstance(b, Fraction) and b.denominator == 1 \
                and abs(b.numerator) <= 4096 and (a != 0 or b > 0):
            return a ** b.numerator
        with mpmath.workdps(WORK_DPS):
            return _to_mp(a) ** _to_mp(b)
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        with mpmath.workdps(WORK_DPS):
            return +_CONSTS[node.id]
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and not node.keywords:
        return _FUNCS[node.func.id](*[_eval(a) for a in node.args])
    raise ValueError(f"unsupported expression element: {ast.dump(node)}")


def parse_real(value) -> Real:
    """Exact rational or WORK_DPS mpf from a number or a small arithmetic expression.

    Accepted: + - * / **, pi, e, sqrt, cbrt, root(a, k), exp, log, liouville(K).
    Python floats are taken at their exact binary value.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError("non-finite coordinate")
        return Fraction(float(value))
    if isinstance(value, mpmath.mpf):
        return value
    if isinstance(value, str):
        try:
            tree = ast.parse(value.strip(), mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse {value!r}") from exc
        return _eval(tree)
    raise TypeError(f"cannot interpret {value!r} as a real number")


@dataclass(frozen=True)
class XVec:
    """A point of R^n with exact or high-precision coordinates."""

    values: tuple
    labels: tuple[str, ...] = field(default=())

    @classmethod
    def of(cls, x) -> "XVec":
        if isinstance(x, XVec):
            return x
        if isinstance(x, (str, int, float, Fraction, mpmath.mpf, np.floating, np.integer)):
            x = [x]
        items = list(x)
        if not items:
            raise ValueError("empty vector")
        vals = tuple(parse_real(v) for v in items)
        labels = tuple(v if isinstance(v, str) else str(v) for v in items)
        return cls(vals, labels)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def rational(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values)

    def mp(self) -> list:
        with mpmath.workdps(WORK_DPS):
            return [_to_mp(v) for v in self.values]

    def floats(self) -> np.ndarray:
        with mpmath.workdps(WORK_DPS):
            return np.array([float(_to_mp(v)) for v in self.values])

    def float_error(self) -> np.ndarray:
        """Upper bounds for |x_i - float(x_i)|."""
        out = []
        with mpmath.workdps(WORK_DPS):
            for v, f in zip(self.values, self.floats()):
                if isinstance(v, Fraction):
                    e = abs(v - Fraction(f))
                    out.append(float(e) * (1 + 1e-12) + 1e-300)
                else:
                    out.append(float(abs(_to_mp(v) - f)) * (1 + 1e-12) + 1e-300)
        return np.array(out)


def _check_weight(x: XVec, w: Weight) -> None:
    if x.n != w.n:
        raise ValueError(f"x has {x.n} coordinates but the weight has {w.n}")


def _nearest(v: Real) -> int:
    if isinstance(v, Fraction):
        return round(v)  # half to even
    with mpmath.workdps(WORK_DPS):
        return int(mpmath.nint(v))


def _dist_exact(v: Real):
    return abs(v - _nearest(v))


# ---------------------------------------------------------------- scans

_ULP = 2.0 ** -52


def _scan_min(x: XVec, qmax: int, factors: Callable[[np.ndarray], np.ndarray],
              factors_exact: Callable[[int], list], chunk: int = 1 << 19):
    """min over 1 <= q <= qmax of max_i f_i(q) dist(q x_i, Z), certified.

    Returns (value as mpf or Fraction 0, q).  Ties go to the smallest q.
    """
    xd = x.floats()
    ex = x.float_error()
    best_hi = math.inf
    cand: list[np.ndarray] = []
    for start in range(1, qmax + 1, chunk):
        q = np.arange(start, min(qmax, start + chunk - 1) + 1, dtype=float)
        y = q[:, None] * xd[None, :]
        dist = np.abs(y - np.rint(y))
        err = q[:, None] * ex[None, :] + 2 * _ULP * np.abs(y) + 1e-300
        f = factors(q)
        hi = np.max(f * (dist + err) * (1 + 1e-13), axis=1)
        lo = np.max(f * np.maximum(dist - err, 0.0) * (1 - 1e-13), axis=1)
        best_hi = min(best_hi, float(hi.min()))
        cand = [c[c[:, 1] <= best_hi] for c in cand]
        pick = lo <= best_hi
        cand.append(np.column_stack([q[pick], lo[pick]]))
    qs = sorted(int(v) for c in cand for v in c[:, 0] if v <= qmax)
    best_val, best_q = None, None
    with mpmath.workdps(WORK_DPS):
        xs = x.values
        for qi in qs:
            fac = factors_exact(qi)
            val = max(fac[i] * _to_mp(_dist_exact(qi * xs[i])) if _dist_exact(qi * xs[i]) != 0
                      else mpmath.mpf(0) for i in range(x.n))
            if best_val is None or val < best_val:
                best_val, best_q = val, qi
    return best_val, best_q


@dataclass(frozen=True)
class BadnessReport:
    constant: float
    witness: tuple[int, ...]   # (p_1, ..., p_n, q)
    horizon: int


def _witness(x: XVec, q: int) -> tuple[int, ...]:
    return tuple(-_nearest(q * v) for v in x.values) + (q,)


def badness_constant_direct(x, w: Weight, Q: int) -> BadnessReport:
    """min over 0 < |q| <= Q of max_i |q|^{r_i} dist(q x_i, Z)."""
    x = XVec.of(x)
    _check_weight(x, w)
    Q = int(Q)
    if Q < 1:
        raise ValueError("horizon Q must be >= 1")
    r = w.array

    def fac(q):
        return q[:, None] ** r[None, :]

    def fac_exact(q):
        return [mpmath.mpf(q) ** mpmath.mpf(ri) for ri in w.r]

    val, q = _scan_min(x, Q, fac, fac_exact)
    return BadnessReport(constant=float(val), witness=_witness(x, q), horizon=Q)


def dirichlet_witness(x, w: Weight, N: float) -> tuple[int, ...]:
    """(p_1, ..., p_n, q) with 0 < q <= N and |q x_i + p_i| <= N^{-r_i}.

    Among all q <= floor(N) the one minimising max_i N^{r_i} |q x_i + p_i|
    is returned (smallest q on ties).
    """
    x = XVec.of(x)
    _check_weight(x, w)
    if not N > 1:
        raise ValueError("N must exceed 1")
    qmax = int(math.floor(N))
    scale = float(N) ** w.array

    def fac(q):
        return np.broadcast_to(scale, (q.shape[0], w.n))

    def fac_exact(q):
        return [mpmath.mpf(N) ** mpmath.mpf(ri) for ri in w.r]

    val, q = _scan_min(x, qmax, fac, fac_exact)
    if val > 1 + 1e-12:
        raise RuntimeError(f"no Dirichlet witness up to N = {N}; this contradicts Dirichlet's theorem")
    return _witness(x, q)


def _box_bound(N: float, r: float) -> int:
    """Largest integer A with A < N^r (strict), integer boundary read with 1e-12 slack."""
    v = float(N) ** r
    A = math.floor(v)
    if abs(v - round(v)) <= 1e-12 * max(1.0, v):
        A = round(v) - 1
    return max(A, 0)


def dual_only_zero_solution(x, w: Weight, c: float, N: float, cap: int = 10**7,
                            chunk: int = 1 << 18) -> bool:
    """True iff (0, ..., 0) is the only integer (a_0, a) with
    |a_0 + a.x| < c / N and |a_i| < N^{r_i}."""
    x = XVec.of(x)
    _check_weight(x, w)
    if not c > 0 or not N >= 1:
        raise ValueError("need c > 0 and N >= 1")
    thr = float(c) / float(N)
    if thr > 1:
        return False  # a = 0 with a_0 = 1
    bounds = [_box_bound(N, ri) for ri in w.r]
    total = math.prod(2 * A + 1 for A in bounds)
    if total > cap:
        raise ResourceError(f"dual box has {total} points, cap {cap}")
    if total == 1:
        return True
    xd = x.floats()
    ex = x.float_error()
    axes = [np.arange(-A, A + 1, dtype=float) for A in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, x.n)
    # one of each +-pair: first nonzero coordinate positive
    nz = grid[np.any(grid != 0, axis=1)]
    lead = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
    grid = nz[lead > 0]
    undecided = []
    for s in range(0, len(grid), chunk):
        a = grid[s:s + chunk]
        y = a @ xd
        dist = np.abs(y - np.rint(y))
        err = np.abs(a) @ ex + 2 * _ULP * (np.abs(a) @ np.abs(xd)) * x.n + 1e-300
        if np.any(dist + err < thr):
            return False
        undecided.append(a[dist - err < thr])
    with mpmath.workdps(WORK_DPS):
        thr_exact = Fraction(c) / Fraction(N) if isinstance(c, (int, Fraction)) else None
        for block in undecided:
            for a in block:
                y = sum((int(ai) * v for ai, v in zip(a, x.values)), Fraction(0))
                dist = _dist_exact(y)
                if thr_exact is not None and isinstance(dist, Fraction):
                    if dist < thr_exact:
                        return False
                elif _to_mp(dist) < mpmath.mpf(c) / mpmath.mpf(N):
                    return False
    return True


# ---------------------------------------------------------------- orbits

CONVENTIONS = ("a_V", "d_U")


@dataclass(frozen=True)
class OrbitTrace:
    times: np.ndarray
    lambda1: np.ndarray
    certified_floor: float
    convention: str
    weight: Weight
    witnesses: tuple = field(repr=False, default=())   # integer (p, q) per sample

    def floor_until(self, t_max: float) -> float:
        """Certified floor restricted to samples with t <= t_max."""
        k = int(np.searchsorted(self.times, t_max * (1 + 1e-12), side="right"))
        return certified_floor(self.times[:max(k, 1)], self.lambda1[:max(k, 1)], self.weight.r[0])


def certified_floor(times: np.ndarray, lam: np.ndarray, r1: float) -> float:
    """min over gaps of min(lam_k, lam_{k+1}) e^{-(1 + r1) gap / 2}."""
    if len(lam) == 1:
        return float(lam[0])
    gaps = np.diff(times)
    pair = np.minimum(lam[:-1], lam[1:])
    return float(np.min(pair * np.exp(-(1 + r1) * gaps / 2)))


def _orbit_setup(x: XVec, w: Weight, convention: str):
    n = x.n
    xs = x.mp()
    one, zero = mpmath.mpf(1), mpmath.mpf(0)
    P = [[one if i == j else zero for j in range(n + 1)] for i in range(n + 1)]
    if convention == "a_V":
        for i in range(n):
            P[i][n] = xs[i]
        ex = np.array(list(w.r) + [-1.0])
    elif convention == "d_U":
        for j in range(n):
            P[0][j + 1] = xs[j]
        ex = np.array([1.0] + [-ri for ri in w.r])
    else:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    return P, ex


def _shortest_in_reduced(B: np.ndarray) -> tuple[np.ndarray, float]:
    d = B.shape[0]
    r0 = float(np.min(np.max(np.abs(B), axis=0)))
    Y = enumerate_ball(B, math.sqrt(d) * r0)
    if Y.shape[0] == 0:
        j = int(np.argmin(np.max(np.abs(B), axis=0)))
        Y = np.eye(B.shape[1], dtype=np.int64)[j:j + 1]
    norms = np.max(np.abs(Y.astype(float) @ B.T), axis=1)
    m = float(norms.min())
    tied = np.flatnonzero(norms <= m * (1 + 1e-9))
    best = min(tied, key=lambda i: (int(np.abs(Y[i]).sum()), tuple(-Y[i])))
    return Y[best], m


def orbit_trace(x, w: Weight, convention: str = "a_V", T: float = 30.0,
                step: float = 0.01) -> OrbitTrace:
    """Sample lambda_1 along a_r(t)V(x)Z^{n+1} (or d_r(t)U(x)Z^{n+1}) on [0, T].

    An integer change of basis H is carried along the orbit; the flowed basis
    P H is formed at WORK_DPS digits and only then rounded to doubles, so the
    reduced basis handed to the enumerator is accurate whatever the size of t.
    """
    x = XVec.of(x)
    _check_weight(x, w)
    if not T > 0:
        raise ValueError("T must be positive")
    if not 0 < step <= 0.1:
        raise ValueError("step must lie in (0, 0.1]")
    nsteps = int(math.floor(T / step + 1e-9))
    times = np.arange(nsteps + 1) * step
    if times[-1] < T - 1e-12:
        times = np.append(times, T)
    P, ex = _orbit_setup(x, w, convention)
    d = x.n + 1
    PH = P
    H = [[int(i == j) for j in range(d)] for i in range(d)]
    lam = np.empty(len(times))
    wit = []
    with mpmath.workdps(WORK_DPS):
        PHf = np.array([[float(v) for v in row] for row in PH])
        for k, t in enumerate(times):
            scale = np.exp(ex * t)
            B = PHf * scale[:, None]
            _, U = lll(B)
            if any(U[i, j] != int(i == j) for i in range(d) for j in range(d)):
                Ui = [[int(v) for v in row] for row in U]
                PH = [[mpmath.fsum(PH[i][l] * Ui[l][j] for l in range(d) if Ui[l][j])
                       for j in range(d)] for i in range(d)]
                H = [[sum(H[i][l] * Ui[l][j] for l in range(d)) for j in range(d)]
                     for i in range(d)]
                PHf = np.array([[float(v) for v in row] for row in PH])
                B = PHf * scale[:, None]
            y, m = _shortest_in_reduced(B)
            lam[k] = m
            wit.append(tuple(sum(H[i][j] * int(y[j]) for j in range(d)) for i in range(d)))
    floor = certified_floor(times, lam, w.r[0])
    return OrbitTrace(times=times, lambda1=lam, certified_floor=floor,
                      convention=convention, weight=w, witnesses=tuple(wit))


# ---------------------------------------------------------------- correspondence

CLASS_TAU = 0.01
SLACK_FACTOR = 4.0


@dataclass(frozen=True)
class CorrespondenceReport:
    direct_constant: float
    orbit_floor: float
    Q: int
    T: float
    direct_class: str
    orbit_class: str
    verdict: str               # "consistent", "violation" or "inconclusive"
    notes: tuple[str, ...] = ()


def classify(value: float, tau: float = CLASS_TAU) -> str:
    return "bad at this scale" if value >= tau else "not bad at this scale"


def default_horizon_time(Q: int, direct_constant: float, tau: float = CLASS_TAU) -> float:
    """ln Q + ln(2 / c) with c clipped below at tau / SLACK_FACTOR."""
    c = max(direct_constant, tau / SLACK_FACTOR)
    return math.log(Q) + math.log(2.0 / min(c, 1.0))


def correspondence_check(x, w: Weight, Q: int, T: Optional[float] = None,
                         step: float = 0.01, tau: float = CLASS_TAU) -> CorrespondenceReport:
    """Check both finite-scale implications between the direct test and the a_V orbit.

    (A) direct constant c over |q| <= Q  =>  lambda_1 >= min(1, c) on [0, ln Q].
    (B) lambda_1 >= c on [0, T]  =>  direct constant >= c / eps over
        |q| <= c e^T / 2, with eps = max_i (2 / c)^{r_i}.
    Either failing is a violation.  Otherwise the two classifications at
    threshold tau are compared; disagreement inside a factor-4 band around
    tau is inconclusive.
    """
    x = XVec.of(x)
    _check_weight(x, w)
    rep = badness_constant_direct(x, w, Q)
    cd = rep.constant
    if T is None:
        T = default_horizon_time(Q, cd, tau)
    tr = orbit_trace(x, w, "a_V", T, step)
    co = tr.certified_floor
    notes = []
    violation = False

    floor_a = tr.floor_until(math.log(Q))
    if floor_a < min(1.0, cd) * (1 - 1e-9) - 1e-12:
        violation = True
        notes.append(f"(A) failed: floor {floor_a:.6g} on [0, ln Q] below {min(1.0, cd):.6g}")
    else:
        notes.append(f"(A) ok: floor {floor_a:.6g} >= {min(1.0, cd):.6g}")

    co_b = min(co, 1.0)
    qb = int(math.floor(co_b * math.exp(T) / 2)) if co_b > 0 else 0
    qb = min(qb, 10 * Q)
    if qb >= 1:
        eps = max((2.0 / co_b) ** ri for ri in w.r)
        cb = badness_constant_direct(x, w, qb).constant
        if cb < co_b / eps * (1 - 1e-9):
            violation = True
            notes.append(f"(B) failed: direct {cb:.6g} at horizon {qb} below {co_b / eps:.6g}")
        else:
            notes.append(f"(B) ok: direct {cb:.6g} >= {co_b / eps:.6g} at horizon {qb}")
    else:
        notes.append("(B) vacuous: horizon below 1")

    dcls, ocls = classify(cd, tau), classify(co, tau)
    if violation:
        verdict = "violation"
    elif dcls == ocls:
        verdict = "consistent"
    elif any(tau / SLACK_FACTOR <= v <= tau * SLACK_FACTOR for v in (cd, co)):
        verdict = "inconclusive"
    else:
        verdict = "violation"
        notes.append("classifications disagree outside the slack band")
    return CorrespondenceReport(direct_constant=cd, orbit_floor=co, Q=int(Q), T=float(T),
                                direct_class=dcls, orbit_class=ocls, verdict=verdict,
                                notes=tuple(notes))


# ---------------------------------------------------------------- curated set

CURATED_SAMPLES = (
    {"name": "golden", "x": ["(sqrt(5)-1)/2"], "weight": [1.0], "Q": 10000},
    {"name": "silver", "x": ["sqrt(2)-1"], "weight": [1.0], "Q": 10000},
    {"name": "sqrt3", "x": ["sqrt(3)"], "weight": [1.0], "Q": 10000},
    {"name": "rational-3/7", "x": ["3/7"], "weight": [1.0], "Q": 10000},
    {"name": "rational-22/7", "x": ["22/7"], "weight": [1.0], "Q": 10000},
    {"name": "liouville-3", "x": ["liouville(3)"], "weight": [1.0], "Q": 10000},
    {"name": "liouville-4", "x": ["liouville(4)"], "weight": [1.0], "Q": 1000000},
    {"name": "cubic-pair", "x": ["cbrt(2)", "cbrt(4)"], "weight": [0.5, 0.5], "Q": 10000},
    {"name": "rational-pair", "x": ["1/3", "2/5"], "weight": [0.5, 0.5], "Q": 10000},
    {"name": "quadratic-pair", "x": ["sqrt(2)", "sqrt(3)"], "weight": [0.5, 0.5], "Q": 10000},
    {"name": "liouville-weighted", "x": ["liouville(3)", "liouville(3)**2"], "weight": [0.75, 0.25],
     "Q": 10000},
)


def classify_sample(sample: dict, tau: float = CLASS_TAU) -> dict:
    """Direct and dual classifications of one sample at threshold tau.

    Direct: constant over 0 < q <= Q at least tau.  Dual: no nonzero solution
    of |a_0 + a.x| < tau / N with |a_i| < N^{r_i}, N = Q + 1, so that both
    tests see the same integer range.
    """
    w = Weight(sample["weight"])
    x = XVec.of(sample["x"])
    Q = int(sample["Q"])
    direct = badness_constant_direct(x, w, Q)
    dual_ok = dual_only_zero_solution(x, w, tau, Q + 1)
    return {
        "direct_constant": direct.constant,
        "direct_witness": list(direct.witness),
        "direct_class": classify(direct.constant, tau),
        "dual_class": "bad at this scale" if dual_ok else "not bad at this scale",
    }


def build_curated(tau: float = CLASS_TAU) -> dict:
    """Recompute the curated table; the shipped data file is this output frozen."""
    return {"tau": tau, "samples": [dict(sample, **classify_sample(sample, tau))
                                     for sample in CURATED_SAMPLES]}


def load_curated() -> dict:
    import json
    from importlib import resources
    return json.loads(resources.files("badflow").joinpath("data/curated.json").read_text())
