"""Derivative-free maximisation of the key rate over free protocol parameters.

The constrained parameters are mapped onto an unconstrained vector ``z``:

* ``mu3 = z0**2``, ``mu2 = mu3 + z1**2``, ``mu1 = mu2 + mu3 + z2**2``
* ``(p_mu1, p_mu2, p_mu3) = softmax(z3, z4, 0)``
* ``p_z = sigmoid(z5)`` and ``q_t = sigmoid(z6)`` (AD only)

A parameter held fixed keeps its coordinate in this vector, so fixing
``mu2`` while ``mu3`` moves holds the gap ``mu2 - mu3`` constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .mc_oracle.rng import stream
from .params import ChannelParams, ParameterError, ProtocolParams
from .skl import SklResult, secure_key_length

COORDS = ("mu3", "mu2", "mu1", "p_mu1", "p_mu2", "p_z", "q_t")
INVALID_PENALTY = -1.0


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


def encode(pp: ProtocolParams) -> np.ndarray:
    """Unconstrained coordinates of ``pp`` (inverse of ``decode``)."""
    mu1, mu2, mu3 = pp.mu
    p1, p2, p3 = pp.p_mu
    return np.array([
        math.sqrt(mu3),
        math.sqrt(mu2 - mu3),
        math.sqrt(mu1 - mu2 - mu3),
        math.log(p1 / p3),
        math.log(p2 / p3),
        _logit(pp.p_z),
        _logit(pp.q_t),
    ])


def decode(z: Sequence[float], template: ProtocolParams, with_test_set: bool = True) -> ProtocolParams:
    """Protocol parameters for coordinates ``z``; non-free fields come from ``template``.

    Raises ``ParameterError`` if the point lands on a constraint boundary.
    """
    mu3 = z[0] ** 2
    mu2 = mu3 + z[1] ** 2
    mu1 = mu2 + mu3 + z[2] ** 2
    logits = np.array([z[3], z[4], 0.0])
    w = np.exp(logits - logits.max())
    p = w / w.sum()
    p_mu = (float(p[0]), float(p[1]), float(1.0 - p[0] - p[1]))
    q_t = _sigmoid(z[6]) if with_test_set else 0.0
    return replace(template, mu=(mu1, mu2, mu3), p_mu=p_mu, p_z=_sigmoid(z[5]), q_t=q_t)


@dataclass
class OptimizationProblem:
    """Key-rate maximisation at one channel point.

    ``variant`` is ``"ad"`` (block size ``template.b``) or ``"bb84"``.
    ``template`` supplies N, the security parameters and the starting
    point; ``free_params`` picks which coordinates move.
    """

    channel: ChannelParams
    template: ProtocolParams
    variant: str = "ad"
    free_params: tuple[str, ...] | None = None
    budget: int = 2000
    restarts: int = 20
    seed: int = 0
    simplex_edge: float = 0.1
    restart_spread: float = 0.5
    constant: str = "derivation"
    monotonicity: str = "grid"
    objective: Callable[[ProtocolParams], float] | None = None

    def __post_init__(self):
        if self.variant not in ("ad", "bb84"):
            raise ParameterError("variant", f"must be 'ad' or 'bb84', got {self.variant!r}")
        if self.variant == "bb84":
            self.template = replace(self.template, q_t=0.0)
        allowed = COORDS if self.variant == "ad" else COORDS[:-1]
        if self.free_params is None:
            self.free_params = allowed
        bad = [p for p in self.free_params if p not in allowed]
        if bad:
            raise ParameterError("free_params", f"not optimisable for {self.variant}: {bad}")
        if self.budget < 1:
            raise ParameterError("budget", "must be >= 1")
        if self.restarts < 0:
            raise ParameterError("restarts", "must be >= 0")
        if self.template.mu[2] == 0.0 and "mu3" in self.free_params:
            # z0 = 0 is a stationary point of mu3 = z0**2; start just inside
            self.template = replace(self.template, mu=(self.template.mu[0], self.template.mu[1], 1e-6))

    @property
    def free_index(self) -> list[int]:
        return [COORDS.index(p) for p in self.free_params]

    def evaluate(self, pp: ProtocolParams) -> SklResult:
        return secure_key_length(pp, self.channel, self.variant, self.constant, self.monotonicity)

    def value(self, pp: ProtocolParams) -> float:
        """Objective: unclamped key length per pulse, or a flat penalty if invalid."""
        if self.objective is not None:
            return self.objective(pp)
        res = self.evaluate(pp)
        raw = res.ell_raw
        if not res.valid or not math.isfinite(raw):
            return INVALID_PENALTY
        return raw / pp.N


@dataclass
class OptimizationResult:
    params: ProtocolParams
    result: SklResult | None
    value: float
    evaluations: int
    restart_values: list[float] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.result.rate if self.result is not None else max(self.value, 0.0)


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Independent counter-based stream for one restart."""
    return stream(seed, restart)


def optimize_key_rate(prob: OptimizationProblem) -> OptimizationResult:
    """Nelder-Mead from the template point plus ``restarts`` perturbed starts.

    The best point over every evaluation is kept, so the answer is never
    worse than any start point.
    """
    with_t = prob.variant == "ad"
    z_base = encode(prob.template)
    idx = prob.free_index
    best = {"value": -math.inf, "z": z_base.copy()}
    count = [0]

    def full(y):
        z = z_base.copy()
        z[idx] = y
        return z

    def fun(y):
        z = full(y)
        count[0] += 1
        try:
            pp = decode(z, prob.template, with_t)
        except ParameterError:
            v = INVALID_PENALTY
        else:
            v = prob.value(pp)
        if v > best["value"]:
            best["value"], best["z"] = v, z
        return -v

    starts = [z_base[idx]]
    for r in range(1, prob.restarts + 1):
        rng = restart_rng(prob.seed, r)
        starts.append(z_base[idx] + rng.normal(0.0, prob.restart_spread, len(idx)))

    restart_values = []
    for y0 in starts:
        if not idx:
            fun(np.array([]))
            restart_values.append(best["value"])
            continue
        simplex = np.vstack([y0] + [y0 + prob.simplex_edge * e for e in np.eye(len(idx))])
        res = minimize(
            fun, y0, method="Nelder-Mead",
            options={"maxfev": prob.budget, "initial_simplex": simplex,
                     "xatol": 1e-9, "fatol": 1e-16},
        )
        restart_values.append(-float(res.fun))

    pp = decode(best["z"], prob.template, with_t)
    result = prob.evaluate(pp) if prob.objective is None else None
    return OptimizationResult(pp, result, best["value"], count[0], restart_values)


@dataclass
class ScanPoint:
    value: float
    rate: float
    params: ProtocolParams
    result: SklResult | None


@dataclass
class ScanResult:
    points: list[ScanPoint]
    bracket: tuple[float, float] | None
    crossing: ScanPoint | None = None


def threshold_scan(
    make_problem: Callable[[float, ProtocolParams | None], OptimizationProblem],
    values: Sequence[float],
    tol: float | None = None,
    refine_restarts: int = 2,
    log: bool = False,
) -> ScanResult:
    """Optimise independently at each sweep value and bracket the zero-rate crossing.

    ``make_problem(value, warm)`` builds the problem at one sweep value;
    ``warm`` is the best parameters found at the neighbouring point (or None).
    The sweep is assumed to run from key towards no key. With ``tol`` the
    bracket is shrunk by bisection until narrower than ``tol``; ``crossing``
    then holds the last positive point. With ``log`` the bisection runs on
    ``log10`` of the sweep value and ``tol`` is measured in decades.
    """
    points: list[ScanPoint] = []
    warm = None
    for v in values:
        opt = optimize_key_rate(make_problem(v, warm))
        points.append(ScanPoint(v, opt.rate, opt.params, opt.result))
        if opt.rate > 0:
            warm = opt.params
    bracket = None
    last_pos = None
    for a, b in zip(points, points[1:]):
        if a.rate > 0 and b.rate <= 0:
            bracket, last_pos = (a.value, b.value), a
            break
    if bracket is None or tol is None:
        return ScanResult(points, bracket, last_pos)
    lo, hi = bracket

    def width(a, b):
        return abs(math.log10(b / a)) if log else abs(b - a)

    while width(lo, hi) > tol:
        mid = math.sqrt(lo * hi) if log else 0.5 * (lo + hi)
        prob = make_problem(mid, last_pos.params)
        prob.restarts = min(prob.restarts, refine_restarts)
        opt = optimize_key_rate(prob)
        if opt.rate > 0:
            lo, last_pos = mid, ScanPoint(mid, opt.rate, opt.params, opt.result)
        else:
            hi = mid
    return ScanResult(points, (lo, hi), last_pos)
