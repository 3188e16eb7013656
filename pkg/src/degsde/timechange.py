"""Weak solutions of dX = |X|^a dW built by time-changing Brownian motion.

The clock is A_t, the integral of |B_s|^(-2a) along the driving path; its
piecewise-linear inverse maps process time back to driving time.  Because
the construction only reparametrizes the driving path, level-hitting order
is inherited from the Brownian path itself, where it can be detected with
bridge corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonUnreachableError, StepBudgetError
from .rng import BrownianPath, SeedId, _generator, bridge_crossing_prob, extend_path

__all__ = [
    "AdditiveFunctional",
    "DiffusionPath",
    "additive_functional",
    "time_change_solution",
    "occupation_fraction",
    "ExitSample",
    "exit_sample",
]


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")


@dataclass
class AdditiveFunctional:
    """Cumulative clock A_t = integral of |B|^(-2a), on the driving grid."""

    base_times: np.ndarray
    values: np.ndarray


@dataclass
class DiffusionPath:
    """A simulated solution path on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    alpha: float
    hit_record: dict = field(default_factory=dict)
    origin: str = "time-change"


def _step_speed_integrals(b: np.ndarray, dt: float, alpha: float) -> np.ndarray:
    """Per-step integral of |B|^(-2a), B linear within the step.

    Every step uses the exact integral of the linear interpolant (finite
    through 0 because 2a < 1); a flat step falls back to the pointwise
    value.  The trapezoid rule is not used anywhere: it diverges as grid
    points approach 0, and even on cells merely near 0 it carries a
    scale-invariant upward bias of order dt^(1/2-a) that does not average
    out over paths.
    """
    p = -2.0 * alpha
    b0, b1 = b[:-1], b[1:]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # antiderivative of |u|^(-2a): sign(u) |u|^(1-2a) / (1-2a)
        q = 1.0 + p
        anti = lambda u: np.sign(u) * np.abs(u) ** q / q
        closed = (anti(b1) - anti(b0)) * dt / (b1 - b0)
        flat = dt * np.abs(b0) ** p
        out = np.where(b0 == b1, flat, closed)
    return out


def additive_functional(path: BrownianPath, alpha: float) -> AdditiveFunctional:
    """Clock of the time change along a driving path."""
    _check_alpha(alpha)
    vals = path.values()
    a = np.empty(vals.size)
    a[0] = 0.0
    np.cumsum(_step_speed_integrals(vals, path.dt, alpha), out=a[1:])
    return AdditiveFunctional(path.times(), a)


def _invert_clock_indices(a: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Driving-grid index nearest to the piecewise-linear inverse of A."""
    idx = np.searchsorted(a, targets, side="left")
    idx = np.clip(idx, 1, a.size - 1)
    denom = a[idx] - a[idx - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom > 0, (targets - a[idx - 1]) / denom, 1.0)
    near = idx - 1 + (frac >= 0.5)
    near[targets <= 0] = 0
    return near


def _first_hits(b: np.ndarray, dt: float, levels, seed: SeedId | None) -> dict:
    """First driving-step index crossing each level, bridge corrected.

    Without a seed the bridge decision is skipped (grid crossings only).
    """
    hits = {}
    b0, b1 = b[:-1], b[1:]
    ugen = _generator(seed, uniform=True) if seed is not None else None
    for lev in levels:
        grid = (b0 - lev) * (b1 - lev) <= 0
        if ugen is not None:
            p = bridge_crossing_prob(b0, b1, dt, lev)
            crossed = grid | (ugen.random(b0.size) < p)
        else:
            crossed = grid
        hits[lev] = int(np.argmax(crossed)) if crossed.any() else None
    return hits


def time_change_solution(
    path: BrownianPath,
    alpha: float,
    horizon: float,
    *,
    dt_out: float | None = None,
    hit_levels=(),
    max_doublings: int = 24,
) -> DiffusionPath:
    """Solution X_t = B_(inverse clock at t) on a uniform process-time grid.

    Every output value is one of the driving path's grid values.  The path
    is extended deterministically from its seed stream while the clock has
    not yet reached the horizon; when that is impossible the attained clock
    value is reported in the error.
    """
    _check_alpha(alpha)
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if horizon == 0:
        return DiffusionPath(
            np.zeros(1), np.array([path.w0]), alpha,
            {lev: None for lev in hit_levels}, "time-change",
        )
    af = additive_functional(path, alpha)
    for _ in range(max_doublings):
        if af.values[-1] >= horizon:
            break
        try:
            path = extend_path(path, 2 * path.n)
        except ValueError as exc:
            raise HorizonUnreachableError(horizon, float(af.values[-1])) from exc
        af = additive_functional(path, alpha)
    else:
        raise HorizonUnreachableError(horizon, float(af.values[-1]))

    if dt_out is None:
        dt_out = horizon / 1024.0
    if not dt_out > 0:
        raise ValueError(f"dt_out must be positive, got {dt_out}")
    n_out = int(math.floor(horizon / dt_out + 1e-9))
    out_times = dt_out * np.arange(n_out + 1)
    b_vals = path.values()
    values = b_vals[_invert_clock_indices(af.values, out_times)]

    record = {}
    step_hits = _first_hits(b_vals, path.dt, hit_levels, path.seed_id)
    for lev, k in step_hits.items():
        record[lev] = float(af.values[k + 1]) if k is not None else None
    return DiffusionPath(out_times, values, alpha, record, "time-change")


def occupation_fraction(path: DiffusionPath, eps: float, horizon: float) -> float:
    """Fraction of [0, horizon] the path spends inside (-eps, eps).

    Trapezoid-weighted indicator on the grid, truncated at the horizon.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    t = path.times
    ind = (np.abs(path.values) < eps).astype(float)
    h = np.minimum(t[1:], horizon) - np.minimum(t[:-1], horizon)
    return float(np.sum(h * 0.5 * (ind[:-1] + ind[1:])) / horizon)


@dataclass
class ExitSample:
    """Outcome of one driving path run to its first exit of (lo, hi)."""

    side: str                 # "lo" or "hi"
    b_time: float             # driving time at exit
    clock: float | None       # process time at exit (time-change clock)
    integral: float | None    # trapezoid of B^(-2) up to exit, if requested


def exit_sample(
    seed: SeedId,
    x0: float,
    lo: float,
    hi: float,
    dt: float,
    *,
    alpha: float | None = None,
    inv_square: bool = False,
    block: int = 2048,
    max_steps: int = 10**8,
) -> ExitSample:
    """Run one driving path from x0 to its bridge-corrected exit of (lo, hi).

    The clock at exit (process-time exit time of the time-changed solution)
    is accumulated when ``alpha`` is given; ``inv_square`` additionally
    accumulates the trapezoid of B^(-2) in driving time, the quantity whose
    conditional mean the conditioning experiments cross-check.
    """
    if not lo < x0 < hi:
        raise ValueError(f"x0 must lie in (lo, hi), got {x0}")
    if alpha is not None:
        _check_alpha(alpha)
    ngen = _generator(seed)
    ugen = _generator(seed, uniform=True)
    sqdt = math.sqrt(dt)
    last = x0
    clock = 0.0 if alpha is not None else None
    integral = 0.0 if inv_square else None
    steps = 0
    while steps < max_steps:
        inc = ngen.standard_normal(block) * sqdt
        b = np.empty(block + 1)
        b[0] = last
        np.cumsum(inc, out=b[1:])
        b[1:] += last
        b0, b1 = b[:-1], b[1:]
        u = ugen.random(block)
        p_hi = bridge_crossing_prob(b0, b1, dt, hi)
        p_lo = bridge_crossing_prob(b0, b1, dt, lo)
        cross_hi = (b1 >= hi) | (u < p_hi)
        cross_lo = ~cross_hi & ((b1 <= lo) | (u < p_hi + p_lo))
        crossed = cross_hi | cross_lo
        k = int(np.argmax(crossed)) if crossed.any() else block
        if alpha is not None or inv_square:
            stop = min(k + 1, block)
            seg = b[: stop + 1]
            if alpha is not None:
                clock += float(np.sum(_step_speed_integrals(seg, dt, alpha)))
            if inv_square:
                # exact integral of the linear interpolant: dt / (b0 b1)
                with np.errstate(divide="ignore", over="ignore"):
                    integral += float(np.sum(dt / (seg[:-1] * seg[1:])))
        if k < block:
            steps += k + 1
            side = "hi" if cross_hi[k] else "lo"
            return ExitSample(side, steps * dt, clock, integral)
        steps += block
        last = float(b[-1])
    raise StepBudgetError(max_steps)
