"""Conditioned solutions of dX = |X|^a dW and their exact oracles.

Conditioning the solution on (0,1) to reach one boundary before the other
turns it into a diffusion with an explicit drift.  Simulation happens in the
transformed coordinate V = X^(1-a), where the diffusion coefficient is the
constant 1-a and the drift is a clean power of V; this removes the severe
Euler bias the degenerate coefficient causes near 0.  Exact Green-function
and hitting-probability formulas for the conditioned laws live here as well,
exposed as quadrature oracles for the Monte Carlo experiments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepFailureError
from .quadrature import adaptive_quad, power_linear_integral
from .rng import SeedId, StreamBank, bridge_crossing_prob
from .timechange import DiffusionPath, _check_alpha

__all__ = [
    "ConditioningMode",
    "drift",
    "green_bessel3",
    "green_interval",
    "mean_exit_time",
    "conditioned_green_integral",
    "bessel3_hitting_prob",
    "ConditionedEnsemble",
    "conditioned_ensemble",
    "simulate_conditioned",
    "Bessel3Report",
    "bessel3_correspondence_check",
]


class ConditioningMode(enum.Enum):
    """Which boundary event the law is conditioned on."""

    HIT_ONE = "hit-one"            # reach 1 before 0; weight x on (0, 1)
    HIT_ZERO = "hit-zero"          # reach 0 before 1; weight 1 - x on (0, 1)
    STAY_POSITIVE = "stay-positive"  # never reach 0; weight x on (0, inf)


def _check_state(mode: ConditioningMode, x: float, boundary_ok: bool = False) -> None:
    hi = math.inf if mode is ConditioningMode.STAY_POSITIVE else 1.0
    if boundary_ok and x == hi:
        return
    if not 0.0 < x < hi:
        raise DomainError(f"state {x} outside domain of {mode.value}")


def drift(mode: ConditioningMode, x: float, alpha: float) -> float:
    """Drift of the conditioned solution at state x (diffusion stays |x|^a)."""
    _check_alpha(alpha)
    _check_state(mode, x, boundary_ok=mode is not ConditioningMode.HIT_ZERO)
    if mode is ConditioningMode.HIT_ZERO:
        return -(x ** (2.0 * alpha)) / (1.0 - x)
    return x ** (2.0 * alpha - 1.0)


# ---------------------------------------------------------------------------
# Exact oracles


def green_bessel3(x: float, y: float) -> float:
    """Green function of a Bessel(3) process started at x and killed at 1.

    The conditioned-to-hit-1 solution has Green function G(x, y) y^(-2a).
    """
    if not 0.0 < x < 1.0 or not 0.0 < y < 1.0:
        raise DomainError(f"green_bessel3 needs x, y in (0,1), got {x}, {y}")
    if y <= x:
        return 2.0 * y * y * (1.0 / x - 1.0)
    return 2.0 * y * y * (1.0 / y - 1.0)


def green_interval(y: float, z: float, eta: float, alpha: float) -> float:
    """Green function of the solution killed on exiting (-eta, eta)."""
    if not 0.0 <= alpha < 0.5:
        raise DomainError(f"alpha must lie in [0, 1/2), got {alpha}")
    if not eta > 0 or not abs(y) < eta or not abs(z) < eta:
        raise DomainError(f"need |y|, |z| < eta, got y={y}, z={z}, eta={eta}")
    if z == 0.0:
        raise DomainError("z = 0 is the singular point of the speed density")
    w = abs(z) ** (-2.0 * alpha)
    if y <= z:
        return w * (y + eta) * (eta - z) / eta
    return w * (z + eta) * (eta - y) / eta


def mean_exit_time(y: float, eta: float, alpha: float, tol: float = 1e-10) -> float:
    """Expected exit time of (-eta, eta) from y: integral of the Green function.

    Adaptive quadrature in z, except that the cells touching the |z|^(-2a)
    singularity are integrated in closed form (the smooth factor is linear).
    """
    if not 0.0 <= alpha < 0.5:
        raise DomainError(f"alpha must lie in [0, 1/2), got {alpha}")
    if not eta > 0 or not abs(y) <= eta:
        raise DomainError(f"need |y| <= eta, got y={y}, eta={eta}")
    if abs(y) == eta:
        return 0.0
    points = sorted({-eta, y, 0.0, eta})
    total = 0.0
    for l, r in zip(points, points[1:]):
        if r <= y:       # lower branch: (z + eta)(eta - y)/eta
            c0, c1 = (eta - y), (eta - y) / eta
        else:            # upper branch: (y + eta)(eta - z)/eta
            c0, c1 = (y + eta), -(y + eta) / eta
        if l == 0.0 or r == 0.0:
            total += power_linear_integral(-2.0 * alpha, c0, c1, l, r)
        else:
            total += adaptive_quad(
                lambda z: green_interval(y, z, eta, alpha), l, r, tol / 4.0
            )
    return total


def conditioned_green_integral(x: float, alpha: float, tol: float = 1e-9) -> float:
    """Quadrature of y^(2a-2) G(x,y) y^(-2a) over (0, 1).

    This is the mean of the additive functional of X^(2a-2) up to absorption
    under the hit-1 conditioning; it collapses analytically to -2 log x, and
    the quadrature is kept as the independent numeric route to that value.
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0,1), got {x}")
    _check_alpha(alpha)

    def g(y):
        if y >= 1.0:
            return 0.0  # killed boundary; the Green function vanishes there
        return y ** (2.0 * alpha - 2.0) * green_bessel3(x, y) * y ** (-2.0 * alpha)

    s0 = 1e-12
    # integrand is constant 2(1/x - 1) on (0, x); the strip below s0 is added
    # in closed form to keep the quadrature away from the 0/0 endpoint
    total = 2.0 * (1.0 / x - 1.0) * s0
    total += adaptive_quad(g, s0, x, tol / 2.0)
    total += adaptive_quad(g, x, 1.0, tol / 2.0)
    return total


def bessel3_hitting_prob(x: float, a: float) -> float:
    """P(Bessel(3) from x reaches a before 1), for 0 < a <= x < 1."""
    if not 0.0 < a <= x < 1.0:
        raise DomainError(f"need 0 < a <= x < 1, got a={a}, x={x}")
    if a == x:
        return 1.0
    return (1.0 / x - 1.0) / (1.0 / a - 1.0)


# ---------------------------------------------------------------------------
# Simulation in the transformed coordinate

_RUNNING, _ABSORBED, _HORIZON, _STEP_FAILURE, _BUDGET = 0, 1, 2, 3, 4
_STATUS_NAMES = {
    _ABSORBED: "absorbed",
    _HORIZON: "horizon",
    _STEP_FAILURE: "step-failure",
    _BUDGET: "budget",
}


@dataclass
class ConditionedEnsemble:
    """Batch outcome of conditioned runs (one entry per path)."""

    mode: ConditioningMode
    alpha: float
    status: np.ndarray           # string code per path
    duration: np.ndarray
    occ_integral: np.ndarray | None   # trapezoid of X^(2a-2) along each path
    hit: dict                    # level -> bool array
    hit_time: dict               # level -> time array (nan if never)
    n_steps: np.ndarray
    paths: list | None = None


def conditioned_ensemble(
    mode: ConditioningMode,
    x0: float,
    alpha: float,
    dt: float,
    seeds,
    *,
    hit_levels=(),
    occ_integral: bool = False,
    horizon: float | None = None,
    max_steps: int = 10**8,
    halving_budget: int = 40,
    record: bool = False,
) -> ConditionedEnsemble:
    """Simulate independent conditioned paths from x0 in V = X^(1-a).

    ``seeds`` is a sequence of SeedId, one per path.  Boundary absorption is
    detected with the Brownian-bridge correction in the V coordinate
    (diffusion there is the constant 1-a).  Proposals that overshoot the
    conditioned-away boundary are rejected and resampled with half the step,
    up to ``halving_budget`` halvings.
    """
    _check_alpha(alpha)
    _check_state(mode, x0)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    seeds = list(seeds)
    n = len(seeds)
    if n < 1:
        raise ValueError("need at least one seed")
    if record and n > 64:
        raise ValueError("record mode is for small ensembles (n <= 64)")
    if occ_integral and mode is ConditioningMode.HIT_ZERO:
        raise ValueError("occupation integrand X^(2a-2) diverges at the hit-zero boundary")

    one_m_a = 1.0 - alpha
    sig = one_m_a
    sig2 = sig * sig
    c_up = one_m_a * (1.0 - alpha / 2.0)   # drift of V is c_up / V when weighted by x
    half_aa = 0.5 * alpha * one_m_a
    vlev = np.array([lev ** one_m_a for lev in hit_levels])
    upper = mode is not ConditioningMode.HIT_ZERO

    bank = StreamBank(seeds)
    v = np.full(n, x0 ** one_m_a)
    t = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)
    duration = np.full(n, np.nan)
    occ = np.zeros(n) if occ_integral else None
    nsteps = np.zeros(n, dtype=np.int64)
    hit_seen = np.zeros((n, len(vlev)), dtype=bool)
    hit_time = np.full((n, len(vlev)), np.nan)
    rec = [([0.0], [x0]) for _ in range(n)] if record else None

    def v_drift(vv):
        if upper:
            return c_up / vv
        xx = vv ** (1.0 / one_m_a)
        return -one_m_a * xx ** alpha / (1.0 - xx) - half_aa / vv

    alive = np.arange(n)
    while alive.size:
        va = v[alive]
        h = np.full(alive.size, dt)
        xi = bank.normals(alive)
        v1 = va + sig * xi * np.sqrt(h) + v_drift(va) * h

        # resample overshoots of the conditioned-away boundary at half steps
        bad = np.nonzero(v1 <= 0.0 if upper else v1 >= 1.0)[0]
        halvings = 0
        while bad.size:
            halvings += 1
            if halvings > halving_budget:
                status[alive[bad]] = _STEP_FAILURE
                duration[alive[bad]] = t[alive[bad]]
                break
            h[bad] *= 0.5
            xib = bank.normals(alive[bad])
            v1[bad] = va[bad] + sig * xib * np.sqrt(h[bad]) + v_drift(va[bad]) * h[bad]
            sub = np.nonzero(v1[bad] <= 0.0 if upper else v1[bad] >= 1.0)[0]
            bad = bad[sub]
        ok = status[alive] == _RUNNING
        if not ok.all():
            alive, va, h, v1 = alive[ok], va[ok], h[ok], v1[ok]
            if alive.size == 0:
                break

        sh = sig2 * h
        if mode is ConditioningMode.HIT_ONE:
            u = bank.uniforms(alive)
            absorbed = (v1 >= 1.0) | (u < bridge_crossing_prob(va, v1, sh, 1.0))
        elif mode is ConditioningMode.HIT_ZERO:
            u = bank.uniforms(alive)
            absorbed = (v1 <= 0.0) | (u < bridge_crossing_prob(va, v1, sh, 0.0))
        else:
            absorbed = np.zeros(alive.size, dtype=bool)

        for j, vl in enumerate(vlev):
            uj = bank.uniforms(alive)
            crossed = ((va - vl) * (v1 - vl) <= 0.0) | (
                uj < bridge_crossing_prob(va, v1, sh, vl)
            )
            fresh = crossed & ~hit_seen[alive, j]
            if fresh.any():
                rows = alive[fresh]
                hit_seen[rows, j] = True
                hit_time[rows, j] = t[rows] + h[fresh]

        if occ is not None:
            # exact integral of V^-2 along the linear interpolant: h / (V0 V1)
            occ[alive] += h / (va * v1)

        t[alive] += h
        v[alive] = v1
        nsteps[alive] += 1
        if rec is not None:
            x1 = v1 ** (1.0 / one_m_a)
            for pos, i in enumerate(alive):
                rec[i][0].append(t[i])
                rec[i][1].append(x1[pos])

        done = absorbed.copy()
        status[alive[absorbed]] = _ABSORBED
        duration[alive[absorbed]] = t[alive[absorbed]]
        if horizon is not None:
            timed_out = ~done & (t[alive] >= horizon)
            status[alive[timed_out]] = _HORIZON
            duration[alive[timed_out]] = t[alive[timed_out]]
            done |= timed_out
        over = ~done & (nsteps[alive] >= max_steps)
        status[alive[over]] = _BUDGET
        done |= over
        alive = alive[~done]

    paths = None
    if rec is not None:
        paths = []
        for i in range(n):
            hit_rec = {
                lev: (float(hit_time[i, j]) if hit_seen[i, j] else None)
                for j, lev in enumerate(hit_levels)
            }
            paths.append(
                DiffusionPath(
                    np.asarray(rec[i][0]), np.asarray(rec[i][1]), alpha,
                    hit_rec, "conditioned",
                )
            )
    return ConditionedEnsemble(
        mode=mode,
        alpha=alpha,
        status=np.array([_STATUS_NAMES.get(s, "running") for s in status]),
        duration=duration,
        occ_integral=occ,
        hit={lev: hit_seen[:, j].copy() for j, lev in enumerate(hit_levels)},
        hit_time={lev: hit_time[:, j].copy() for j, lev in enumerate(hit_levels)},
        n_steps=nsteps,
        paths=paths,
    )


def simulate_conditioned(
    mode: ConditioningMode,
    x0: float,
    alpha: float,
    dt: float,
    seed: SeedId,
    *,
    hit_levels=(),
    horizon: float | None = None,
    max_steps: int = 10**8,
) -> DiffusionPath:
    """One conditioned path, killed at its absorbing boundary.

    The stay-positive mode has no reachable boundary and requires a horizon.
    """
    if mode is ConditioningMode.STAY_POSITIVE and horizon is None:
        raise ValueError("stay-positive runs need a horizon")
    ens = conditioned_ensemble(
        mode, x0, alpha, dt, [seed],
        hit_levels=hit_levels, horizon=horizon, max_steps=max_steps, record=True,
    )
    if ens.status[0] == "step-failure":
        raise StepFailureError(float(ens.duration[0]), "transformed coordinate at its rejection boundary")
    return ens.paths[0]


@dataclass
class Bessel3Report:
    """A conditioned path rewound by the inverse of its intrinsic clock."""

    clock_total: float
    times: np.ndarray
    values: np.ndarray
    hits: dict = field(default_factory=dict)


def bessel3_correspondence_check(path: DiffusionPath, alpha: float, n_out: int = 512) -> Bessel3Report:
    """Reparametrize a hit-1-conditioned path by the clock of X^(2a).

    Under that time change the path is a Bessel(3) path killed at 1, so its
    level-hitting statistics can be compared against the scale-function
    formula (1/x - 1)/(1/a - 1); the hit flags carried by the input path are
    invariant under the reparametrization and are passed through.
    """
    _check_alpha(alpha)
    if path.origin != "conditioned":
        raise ValueError("correspondence check expects a conditioned path")
    x = path.values
    dt_steps = np.diff(path.times)
    g = np.abs(x) ** (2.0 * alpha)
    clock = np.empty(x.size)
    clock[0] = 0.0
    np.cumsum(dt_steps * 0.5 * (g[:-1] + g[1:]), out=clock[1:])
    total = float(clock[-1])
    targets = np.linspace(0.0, total, n_out + 1)
    idx = np.clip(np.searchsorted(clock, targets, side="left"), 1, x.size - 1)
    denom = clock[idx] - clock[idx - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom > 0, (targets - clock[idx - 1]) / denom, 1.0)
    vals = x[idx - 1] + frac * (x[idx] - x[idx - 1])
    vals[0] = x[0]
    return Bessel3Report(total, targets, vals, dict(path.hit_record))
