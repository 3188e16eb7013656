"""Two solutions driven by one shared noise path.

Everything here runs both processes through the same Euler recursion on the
same increments, in the raw coordinate (diffusion |.|^a for both), so the
pathwise statements being tested -- comparison ordering, envelope bounds,
the exponential gap identity, drift-only decay of X^(1-a)+|Y|^(1-a), the
chasing statistics, and two-scheme uniqueness refinement -- face the same
discretization the theory is being checked against.

A state that lands exactly on 0 would freeze the scheme (the coefficient
vanishes there, while the true solution leaves immediately); such states are
nudged by 1e-15 sqrt(h) noise and the nudge is counted in the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .rng import SeedId, StreamBank, bridge_crossing_prob, gen_path, substream
from .stats import Estimate, estimate
from .timechange import _check_alpha

__all__ = [
    "CoupledSample",
    "CoupledChecks",
    "CheckTotals",
    "CoupledEnsemble",
    "coupled_ensemble",
    "coupled_fixed_grid",
    "euler_coupled",
    "state_floor",
    "r_identity_residual",
    "TransformResiduals",
    "transform_residuals",
    "ChasingReport",
    "chasing_experiment",
    "EnvelopeReport",
    "envelope_check",
    "DivergenceRow",
    "uniqueness_refinement",
    "Excursion",
    "ExcursionReport",
    "excursion_agreement",
    "pair_sample",
]

_ZERO_NUDGE = 1e-15


@dataclass
class CoupledSample:
    """One coupled run: shared increments, both paths, and derived series."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    increments: np.ndarray      # driving increments actually consumed, len(times)-1
    alpha: float
    mode: str                   # "plain" | "hit-one" | "hit-zero" | "scheme-pair"
    hit_record: dict = field(default_factory=dict)
    zero_perturbations: int = 0
    stop_reason: str = ""

    def m_series(self) -> np.ndarray:
        """Running pair maximum max(|X|, |Y|)."""
        return np.maximum(np.abs(self.x), np.abs(self.y))

    def z_series(self) -> np.ndarray:
        """Pair gap |X - Y|."""
        return np.abs(self.x - self.y)

    def r_series(self) -> np.ndarray:
        """Power gap X^(1-a) - Y^(1-a), nan once either path leaves (0, inf)."""
        out = np.full(self.x.size, np.nan)
        k = _positive_prefix(self.x, self.y)
        e = 1.0 - self.alpha
        out[:k] = self.x[:k] ** e - self.y[:k] ** e
        return out


def _positive_prefix(x: np.ndarray, y: np.ndarray) -> int:
    """Length of the initial window on which both arrays are positive."""
    bad = (x <= 0) | (y <= 0)
    return int(np.argmax(bad)) if bad.any() else x.size


@dataclass
class CoupledChecks:
    """Which pathwise bounds the engine should verify on every step."""

    comparison: bool = False           # Y <= X (needs y0 < x0)
    envelope_level: float | None = None
    sum_drift: bool = False            # decay of X^(1-a)+|Y|^(1-a) on Y<0<X
    tol_sigmas: float = 3.0            # additive slack in local step deviations


@dataclass
class CheckTotals:
    """Violation counts and worst margins accumulated over an ensemble."""

    steps_checked: int = 0
    comparison_beyond_tol: int = 0
    comparison_raw: int = 0
    comparison_worst: float = -math.inf     # max of Y - X
    env_first_phase_beyond_tol: int = 0
    env_lower_beyond_tol: int = 0
    env_abs_beyond_tol: int = 0
    env_worst_first: float = -math.inf      # max of max(X,|Y|) - 2^(1/(1-a)) x0
    env_worst_lower: float = -math.inf      # max of envelope - Y
    env_worst_abs: float = -math.inf        # max of |Y| - lam
    sum_drift_steps: int = 0
    sum_drift_bad: int = 0                  # reconstructed increments >= 0


@dataclass
class CoupledEnsemble:
    """Batch outcome of coupled runs."""

    mode: str
    alpha: float
    stop_reason: np.ndarray
    duration: np.ndarray
    x_final: np.ndarray
    y_final: np.ndarray
    n_steps: np.ndarray
    zero_perturbations: int
    hit: dict
    hit_time: dict
    checks: CheckTotals | None = None
    samples: list | None = None


_REASONS = ["running", "absorbed-one", "absorbed-zero", "exit-hi", "exit-lo",
            "x-level", "m-level", "horizon", "budget", "step-failure"]
_R = {name: i for i, name in enumerate(_REASONS)}


def coupled_ensemble(
    mode: str,
    x0: float,
    y0: float,
    alpha: float,
    dt: float,
    seeds,
    *,
    stop=("horizon", 1.0),
    hit_levels_x=(),
    checks: CoupledChecks | None = None,
    adaptive: tuple[float, float] | None = None,
    record: bool = False,
    max_steps: int = 10**8,
    halving_budget: int = 40,
) -> CoupledEnsemble:
    """Euler-Maruyama for (X, Y) on shared increments, one run per seed.

    ``stop`` is ("exit-unit",) for X leaving (0,1), ("x-level", lam),
    ("m-level", lam), or ("horizon", T); conditioned modes additionally
    absorb X at their boundary.  ``adaptive`` = (ref_scale, floor) scales the
    step by (max(X,|Y|,floor)/ref_scale)^(2-2a) clipped to [floor ratio, 1],
    matching the natural time scale of each level so that runs started far
    below ref_scale stay resolved without paying the fine step everywhere.
    Hitting of ``hit_levels_x`` by X is bridge-corrected; M/Z level stops use
    grid crossings.
    """
    _check_alpha(alpha)
    if mode not in ("plain", "hit-one", "hit-zero"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "plain" and not 0.0 < x0 < 1.0:
        raise DomainError(f"conditioned modes need x0 in (0,1), got {x0}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    seeds = list(seeds)
    n = len(seeds)
    if n < 1:
        raise ValueError("need at least one seed")
    if record and n > 64:
        raise ValueError("record mode is for small ensembles (n <= 64)")
    kind = stop[0]
    if kind not in ("exit-unit", "x-level", "m-level", "horizon"):
        raise ValueError(f"unknown stop rule {stop!r}")
    stop_val = stop[1] if len(stop) > 1 else None

    e = 1.0 - alpha
    two_a = 2.0 * alpha
    half_aa = 0.5 * alpha * e
    tol_k = (checks.tol_sigmas if checks else 3.0)
    env_lam = checks.envelope_level if checks else None
    env_cap = 2.0 ** (1.0 / e) * x0
    comparison_on = bool(checks and checks.comparison)
    if comparison_on and not y0 < x0:
        raise PreconditionError("comparison check needs y0 < x0")
    checks_vacuous = bool(checks) and y0 == x0

    bank = StreamBank(seeds)
    x = np.full(n, float(x0))
    y = np.full(n, float(y0))
    t = np.zeros(n)
    phase2 = np.full(n, y0 >= 0)          # past the first time Y >= 0
    reason = np.zeros(n, dtype=np.int8)
    dur = np.full(n, np.nan)
    steps = np.zeros(n, dtype=np.int64)
    nudges = 0
    levx = np.asarray(hit_levels_x, dtype=float)
    hit_seen = np.zeros((n, levx.size), dtype=bool)
    hit_time = np.full((n, levx.size), np.nan)
    totals = CheckTotals() if checks else None
    rec = [([0.0], [float(x0)], [float(y0)], []) for _ in range(n)] if record else None

    if adaptive is not None:
        ref_scale, floor = adaptive
        hmin_ratio = (max(floor, 1e-12) / ref_scale) ** (2.0 - 2.0 * alpha)

    alive = np.arange(n)
    while alive.size:
        xa, ya = x[alive], y[alive]
        if adaptive is None:
            h = np.full(alive.size, dt)
        else:
            m = np.maximum(np.maximum(xa, np.abs(ya)), floor)
            h = dt * np.clip((m / ref_scale) ** (2.0 - 2.0 * alpha), hmin_ratio, 1.0)

        def propose(idx_local, hloc, xi):
            xl, yl = xa[idx_local], ya[idx_local]
            dw = xi * np.sqrt(hloc)
            ax = np.abs(xl) ** alpha
            ay = np.abs(yl) ** alpha
            if mode == "plain":
                return xl + ax * dw, yl + ay * dw, dw
            if mode == "hit-one":
                x1 = xl + ax * dw + xl ** (two_a - 1.0) * hloc
                y1 = yl + ay * dw + xl ** (alpha - 1.0) * ay * hloc
            else:
                g = xl ** alpha / (1.0 - xl)
                x1 = xl + ax * dw - xl ** alpha * g * hloc
                y1 = yl + ay * dw - ay * g * hloc
            return x1, y1, dw

        allloc = np.arange(alive.size)
        xi = bank.normals(alive)
        x1, y1, dw = propose(allloc, h, xi)

        if mode != "plain":
            lim_low = mode == "hit-one"
            bad = np.nonzero(x1 <= 0.0 if lim_low else x1 >= 1.0)[0]
            halvings = 0
            while bad.size:
                halvings += 1
                if halvings > halving_budget:
                    reason[alive[bad]] = _R["step-failure"]
                    dur[alive[bad]] = t[alive[bad]]
                    break
                h[bad] *= 0.5
                xib = bank.normals(alive[bad])
                xb, yb, dwb = propose(bad, h[bad], xib)
                x1[bad], y1[bad], dw[bad] = xb, yb, dwb
                sub = np.nonzero(x1[bad] <= 0.0 if lim_low else x1[bad] >= 1.0)[0]
                bad = bad[sub]
            ok = reason[alive] == _R["running"]
            if not ok.all():
                alive, xa, ya, h, x1, y1, dw = (
                    a[ok] for a in (alive, xa, ya, h, x1, y1, dw)
                )
                if alive.size == 0:
                    break

        # nudge exact zeros off the absorbing fixed point of the scheme;
        # direction rides the step's own increment so consumption stays
        # path-local and batch composition cannot shift any stream
        for arr in ((y1,) if mode != "plain" else (x1, y1)):
            z = arr == 0.0
            if z.any():
                sgn = np.where(dw[z] != 0.0, np.sign(dw[z]), 1.0)
                arr[z] = _ZERO_NUDGE * np.sqrt(h[z]) * sgn
                nudges += int(z.sum())

        sx2h = np.maximum(np.abs(xa) ** two_a * h, 1e-300)  # X's local step variance
        stop_hit = np.zeros(alive.size, dtype=bool)
        new_reason = np.zeros(alive.size, dtype=np.int8)

        if mode == "hit-one":
            u = bank.uniforms(alive)
            hitb = (x1 >= 1.0) | (u < bridge_crossing_prob(xa, x1, sx2h, 1.0))
            stop_hit |= hitb
            new_reason[hitb] = _R["absorbed-one"]
        elif mode == "hit-zero":
            u = bank.uniforms(alive)
            hitb = (x1 <= 0.0) | (u < bridge_crossing_prob(xa, x1, sx2h, 0.0))
            stop_hit |= hitb
            new_reason[hitb] = _R["absorbed-zero"]

        if kind == "exit-unit":
            u = bank.uniforms(alive)
            p_hi = bridge_crossing_prob(xa, x1, sx2h, 1.0)
            p_lo = bridge_crossing_prob(xa, x1, sx2h, 0.0)
            hi = (x1 >= 1.0) | (u < p_hi)
            lo = ~hi & ((x1 <= 0.0) | (u < p_hi + p_lo))
            new_reason[hi & ~stop_hit] = _R["exit-hi"]
            new_reason[lo & ~stop_hit] = _R["exit-lo"]
            stop_hit |= hi | lo
        elif kind == "x-level":
            u = bank.uniforms(alive)
            crossed = (x1 >= stop_val) | (u < bridge_crossing_prob(xa, x1, sx2h, stop_val))
            new_reason[crossed & ~stop_hit] = _R["x-level"]
            stop_hit |= crossed
        elif kind == "m-level":
            crossed = np.maximum(np.abs(x1), np.abs(y1)) >= stop_val
            new_reason[crossed & ~stop_hit] = _R["m-level"]
            stop_hit |= crossed

        for j, lev in enumerate(levx):
            uj = bank.uniforms(alive)
            crossed = ((xa - lev) * (x1 - lev) <= 0.0) | (
                uj < bridge_crossing_prob(xa, x1, sx2h, lev)
            )
            fresh = crossed & ~hit_seen[alive, j]
            if fresh.any():
                rows = alive[fresh]
                hit_seen[rows, j] = True
                hit_time[rows, j] = t[rows] + h[fresh]

        if totals is not None and not checks_vacuous:
            sig_loc = np.maximum(np.abs(xa) ** alpha, np.abs(ya) ** alpha)
            tol = tol_k * sig_loc * np.sqrt(h)
            totals.steps_checked += alive.size
            if comparison_on:
                gap = y1 - x1
                totals.comparison_raw += int((gap > 0).sum())
                totals.comparison_beyond_tol += int((gap > tol).sum())
                worst = float(gap.max()) if gap.size else -math.inf
                totals.comparison_worst = max(totals.comparison_worst, worst)
            if env_lam is not None:
                first = ~phase2[alive]
                if first.any():
                    over = np.maximum(x1[first], np.abs(y1[first])) - env_cap
                    totals.env_first_phase_beyond_tol += int((over > tol[first]).sum())
                    totals.env_worst_first = max(totals.env_worst_first, float(over.max()))
                late = ~first
                if late.any():
                    inner = np.maximum(env_lam ** e - x1[late] ** e, 0.0)
                    env = -(inner ** (1.0 / e))
                    under = env - y1[late]
                    totals.env_lower_beyond_tol += int((under > tol[late]).sum())
                    totals.env_worst_lower = max(totals.env_worst_lower, float(under.max()))
                over_abs = np.abs(y1) - env_lam
                totals.env_abs_beyond_tol += int((over_abs > tol).sum())
                totals.env_worst_abs = max(totals.env_worst_abs, float(over_abs.max()))
            if checks.sum_drift:
                win = (ya < 0.0) & (xa > 0.0)
                if win.any():
                    inc = -half_aa * (
                        xa[win] ** (alpha - 1.0) + np.abs(ya[win]) ** (alpha - 1.0)
                    ) * h[win]
                    totals.sum_drift_steps += int(win.sum())
                    totals.sum_drift_bad += int((inc >= 0.0).sum())

        t[alive] += h
        x[alive] = x1
        y[alive] = y1
        phase2[alive] |= y1 >= 0.0
        steps[alive] += 1
        if rec is not None:
            for pos, i in enumerate(alive):
                rec[i][0].append(t[i])
                rec[i][1].append(x1[pos])
                rec[i][2].append(y1[pos])
                rec[i][3].append(dw[pos])

        done = stop_hit.copy()
        reason[alive[stop_hit]] = new_reason[stop_hit]
        dur[alive[stop_hit]] = t[alive[stop_hit]]
        if kind == "horizon":
            out = ~done & (t[alive] >= stop_val)
            reason[alive[out]] = _R["horizon"]
            dur[alive[out]] = t[alive[out]]
            done |= out
        over = ~done & (steps[alive] >= max_steps)
        reason[alive[over]] = _R["budget"]
        dur[alive[over]] = t[alive[over]]
        done |= over
        alive = alive[~done]

    samples = None
    if rec is not None:
        samples = []
        for i in range(n):
            hr = {
                lev: (float(hit_time[i, j]) if hit_seen[i, j] else None)
                for j, lev in enumerate(levx)
            }
            samples.append(
                CoupledSample(
                    np.asarray(rec[i][0]), np.asarray(rec[i][1]),
                    np.asarray(rec[i][2]), np.asarray(rec[i][3]),
                    alpha, mode, hr, nudges, _REASONS[reason[i]],
                )
            )
    return CoupledEnsemble(
        mode=mode,
        alpha=alpha,
        stop_reason=np.array([_REASONS[r] for r in reason]),
        duration=dur,
        x_final=x.copy(),
        y_final=y.copy(),
        n_steps=steps,
        zero_perturbations=nudges,
        hit={lev: hit_seen[:, j].copy() for j, lev in enumerate(levx)},
        hit_time={lev: hit_time[:, j].copy() for j, lev in enumerate(levx)},
        checks=totals,
        samples=samples,
    )


def euler_coupled(
    x0: float,
    y0: float,
    alpha: float,
    mode: str,
    dt: float,
    stop,
    seed: SeedId,
    *,
    hit_levels_x=(),
    max_steps: int = 10**8,
) -> CoupledSample:
    """One recorded coupled run (see coupled_ensemble for the stop rules)."""
    ens = coupled_ensemble(
        mode, x0, y0, alpha, dt, [seed],
        stop=stop, hit_levels_x=hit_levels_x, record=True, max_steps=max_steps,
    )
    return ens.samples[0]


def coupled_fixed_grid(
    x0: float,
    y0: float,
    alpha: float,
    mode: str,
    increments: np.ndarray,
    dt: float,
) -> CoupledSample:
    """Coupled Euler on a caller-supplied increment grid (no resampling).

    Used for refinement studies on one Brownian skeleton: the caller sums
    fine increments into coarse blocks and runs one sample per level.  The
    run stops at the conditioned boundary (grid detection) or when the
    increments run out; there is no step halving, so a conditioned X that
    overshoots its rejection boundary ends the sample there.
    """
    _check_alpha(alpha)
    if mode not in ("plain", "hit-one", "hit-zero"):
        raise ValueError(f"unknown mode {mode!r}")
    inc = np.asarray(increments, dtype=float)
    e = 1.0 - alpha
    x = np.empty(inc.size + 1)
    y = np.empty(inc.size + 1)
    x[0], y[0] = x0, y0
    reason = "horizon"
    n_used = inc.size
    nudges = 0
    sq = math.sqrt(dt)
    for k in range(inc.size):
        xl, yl = x[k], y[k]
        dw = inc[k]
        ax, ay = abs(xl) ** alpha, abs(yl) ** alpha
        if mode == "plain":
            x1 = xl + ax * dw
            y1 = yl + ay * dw
        elif mode == "hit-one":
            x1 = xl + ax * dw + xl ** (2.0 * alpha - 1.0) * dt
            y1 = yl + ay * dw + xl ** (alpha - 1.0) * ay * dt
        else:
            g = xl ** alpha / (1.0 - xl)
            x1 = xl + ax * dw - xl ** alpha * g * dt
            y1 = yl + ay * dw - ay * g * dt
        if y1 == 0.0:
            y1 = _ZERO_NUDGE * sq * (math.copysign(1.0, dw) if dw else 1.0)
            nudges += 1
        if mode == "plain" and x1 == 0.0:
            x1 = _ZERO_NUDGE * sq * (math.copysign(1.0, dw) if dw else 1.0)
            nudges += 1
        x[k + 1], y[k + 1] = x1, y1
        if mode == "hit-one" and (x1 >= 1.0 or x1 <= 0.0):
            reason = "absorbed-one" if x1 >= 1.0 else "step-failure"
            n_used = k + 1
            break
        if mode == "hit-zero" and (x1 <= 0.0 or x1 >= 1.0):
            reason = "absorbed-zero" if x1 <= 0.0 else "step-failure"
            n_used = k + 1
            break
    times = dt * np.arange(n_used + 1)
    return CoupledSample(times, x[: n_used + 1], y[: n_used + 1], inc[:n_used],
                         alpha, mode, {}, nudges, reason)


def r_identity_residual(
    sample: CoupledSample,
    t_max: float | None = None,
    floor: float | None = None,
) -> float:
    """Deviation of the power gap from its exponential representation.

    R_t = X^(1-a) - Y^(1-a) solves a pathwise ODE whose solution is R_0 times
    exp of half a(1-a) times the integral of X^(a-1) Y^(a-1); on windows the
    scheme can track, the returned max |direct - formula| / |R_0| is pure
    discretization error.  The window ends where either path first drops to
    ``floor`` (default: the one-step noise scale, below which the singular
    integrand cannot be integrated on the grid) and at ``t_max``, which makes
    residuals at different steps on one skeleton comparable.
    """
    a = sample.alpha
    if sample.x[0] <= 0 or sample.y[0] <= 0:
        raise DomainError("both paths must start positive")
    if floor is None:
        floor = state_floor(a, float(np.max(np.diff(sample.times))))
    bad = (sample.x <= floor) | (sample.y <= floor)
    k = int(np.argmax(bad)) if bad.any() else sample.x.size
    if k < 2:
        raise DomainError("window starts at or below the tracking floor")
    if t_max is not None:
        k = min(k, int(np.searchsorted(sample.times, t_max, side="right")))
    xs, ys, ts = sample.x[:k], sample.y[:k], sample.times[:k]
    e = 1.0 - a
    r = xs ** e - ys ** e
    if r[0] == 0.0:
        return 0.0
    g = xs ** (a - 1.0) * ys ** (a - 1.0)
    acc = np.empty(k)
    acc[0] = 0.0
    np.cumsum(np.diff(ts) * 0.5 * (g[:-1] + g[1:]), out=acc[1:])
    formula = r[0] * np.exp(0.5 * a * e * acc)
    return float(np.max(np.abs(r - formula)) / abs(r[0]))


@dataclass
class TransformResiduals:
    """Max cumulative reconstruction error per transform identity."""

    x_drifted: float          # X^(1-a) against the conditioned-noise drift form
    x_plain: float            # X^(1-a) against the plain-noise form
    y_abs: float              # |Y|^(1-a) against its signed form (per sign window)
    sum_drift: float          # X^(1-a)+|Y|^(1-a) against its drift-only form
    sum_windows: int
    sum_monotone_ok: bool     # reconstructed drift-only series strictly decreasing


def _max_window_residual(actual, rhs_increments, windows):
    """Max |actual - reconstruction| with the reconstruction restarted per window."""
    worst = 0.0
    for lo, hi in windows:
        if hi - lo < 1:
            continue
        recon = actual[lo] + np.concatenate(([0.0], np.cumsum(rhs_increments[lo:hi])))
        worst = max(worst, float(np.max(np.abs(actual[lo : hi + 1] - recon))))
    return worst


def _mask_windows(mask: np.ndarray):
    """Maximal index runs where the mask holds, keeping only runs of >= 2."""
    windows = []
    i = 0
    n = mask.size
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j < n and mask[j]:
            j += 1
        if j - 1 > i:
            windows.append((i, j - 1))
        i = j
    return windows


def _split_at_sign_changes(windows, v):
    out = []
    for lo, hi in windows:
        start = lo
        for i in range(lo + 1, hi + 1):
            if np.sign(v[i]) != np.sign(v[start]):
                if i - 1 > start:
                    out.append((start, i - 1))
                start = i
        if hi > start:
            out.append((start, hi))
    return out


def state_floor(alpha: float, dt: float, k: float = 3.0) -> float:
    """State scale below which one step's noise dominates the state.

    From |y| = (k sqrt(dt))^(1/(1-a)): below this the power-coordinate
    identities cannot be tracked by any reconstruction on the grid, so
    residual windows stay above it.
    """
    return (k * math.sqrt(dt)) ** (1.0 / (1.0 - alpha))


def transform_residuals(
    sample: CoupledSample,
    alpha: float | None = None,
    *,
    floor: float | None = None,
    t_max: float | None = None,
) -> TransformResiduals:
    """Reconstruct the transformed series from the stored noise and compare.

    All residuals are computed as the max gap between the actual series and
    its cumulative right-hand-side reconstruction, restarted on each maximal
    window where the identity's sign conditions hold with the state above
    the one-step noise floor (right at a sign change the |Y|^(a-1) terms are
    untrackable on any grid).  ``t_max`` trims the series first.
    """
    a = sample.alpha if alpha is None else alpha
    e = 1.0 - a
    half_aa = 0.5 * a * e
    n = sample.x.size
    if t_max is not None:
        n = int(np.searchsorted(sample.times, t_max, side="right"))
    xs, ys, dw, ts = sample.x[:n], sample.y[:n], sample.increments[: n - 1], sample.times[:n]
    hs = np.diff(ts)
    if floor is None:
        floor = state_floor(a, float(hs.max()))

    xwin = _mask_windows(xs > floor)
    with np.errstate(invalid="ignore"):
        xe = np.where(xs > 0, np.abs(xs) ** e, np.nan)
    xw = np.abs(xs[:-1]) ** (a - 1.0)

    if sample.mode == "hit-one":
        inc_drift = e * dw + e * (1.0 - a / 2.0) * xw * hs
        x_drifted = _max_window_residual(xe, inc_drift, xwin)
        dw_plain = dw + xw * hs          # plain noise recovered from the drifted one
    elif sample.mode == "hit-zero":
        x_drifted = math.nan
        dw_plain = dw - np.abs(xs[:-1]) ** a / (1.0 - xs[:-1]) * hs
    else:
        x_drifted = math.nan
        dw_plain = dw
    inc_plain = e * dw_plain - half_aa * xw * hs
    x_plain = _max_window_residual(xe, inc_plain, xwin)

    ywin = _split_at_sign_changes(_mask_windows(np.abs(ys) > floor), ys)
    ye = np.abs(ys) ** e
    sgn = np.sign(ys[:-1])
    yw = np.abs(ys[:-1]) ** (a - 1.0)
    if sample.mode == "hit-one":
        inc_y = e * sgn * dw + e * sgn * xw * hs - half_aa * yw * hs
    else:
        inc_y = e * sgn * dw_plain - half_aa * yw * hs
    y_abs = _max_window_residual(ye, inc_y, ywin)

    sum_windows = [(lo, hi) for lo, hi in _mask_windows((ys < -floor) & (xs > floor))]
    s = xe + ye
    inc_s = -half_aa * (xw + yw) * hs
    sum_drift = _max_window_residual(s, inc_s, sum_windows) if sample.mode == "hit-one" else math.nan
    monotone = all(
        bool(np.all(inc_s[lo:hi] < 0.0)) for lo, hi in sum_windows
    )
    return TransformResiduals(
        x_drifted=x_drifted,
        x_plain=x_plain,
        y_abs=y_abs,
        sum_drift=sum_drift,
        sum_windows=len(sum_windows),
        sum_monotone_ok=monotone,
    )


@dataclass
class ChasingReport:
    """Conditional chasing statistics for one (x0, y0) configuration."""

    x0: float
    y0: float
    alpha: float
    delta: float
    p_chase: Estimate | None          # P(Y_T > 1 - delta | X hits 1 first)
    mean_y_at_one: Estimate | None    # E[Y_T | X hits 1 first]
    mean_neg_y_at_zero: Estimate | None   # E[-Y_T | X hits 0 first]
    counts: dict
    excluded: dict
    rejection_p_one: Estimate | None = None   # unconditioned P(X hits 1 first)


def chasing_experiment(
    x0: float,
    y0: float,
    alpha: float,
    delta: float,
    n: int,
    dt: float,
    master_seed: int,
    *,
    branch: str = "both",
    rejection: bool = False,
    lane_base: int = 0,
    max_steps: int = 10**8,
) -> ChasingReport:
    """Conditional chasing statistics via the conditioned coupled laws.

    The X-hits-1 branch runs under the hit-1 coupling, the X-hits-0 branch
    under the hit-0 coupling, so every run lands in its branch by
    construction; ``rejection`` instead conditions plain-law runs on the
    boundary they exit through (practical only for x0 around 0.1 or larger).
    Steps adapt to the running pair scale so small starting points stay
    resolved.
    """
    if not 0.0 < x0 < 0.25:
        raise DomainError(f"chasing needs x0 in (0, 1/4), got {x0}")
    if not -x0 <= y0 <= x0:
        raise DomainError(f"chasing needs y0 in [-x0, x0], got {y0}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0,1), got {delta}")
    adaptive = (0.25, x0 / 16.0)
    counts: dict = {}
    excluded: dict = {}
    p_chase = mean_y1 = mean_negy0 = rej_p1 = None

    if rejection:
        seeds = [substream(master_seed, lane_base + 2, i) for i in range(n)]
        ens = coupled_ensemble(
            "plain", x0, y0, alpha, dt, seeds,
            stop=("exit-unit",), adaptive=adaptive, max_steps=max_steps,
        )
        one = ens.stop_reason == "exit-hi"
        zero = ens.stop_reason == "exit-lo"
        counts["one"] = int(one.sum())
        counts["zero"] = int(zero.sum())
        excluded["plain"] = int(n - one.sum() - zero.sum())
        rej_p1 = estimate(one[one | zero].astype(float)) if (one | zero).any() else None
        if one.any():
            yt = ens.y_final[one]
            p_chase = estimate((yt > 1.0 - delta).astype(float))
            mean_y1 = estimate(yt)
        if zero.any():
            mean_negy0 = estimate(-ens.y_final[zero])
        return ChasingReport(x0, y0, alpha, delta, p_chase, mean_y1, mean_negy0,
                             counts, excluded, rej_p1)

    if branch in ("both", "hit-one"):
        seeds = [substream(master_seed, lane_base, i) for i in range(n)]
        ens = coupled_ensemble(
            "hit-one", x0, y0, alpha, dt, seeds,
            stop=("horizon", math.inf), adaptive=adaptive, max_steps=max_steps,
        )
        ok = ens.stop_reason == "absorbed-one"
        counts["one"] = int(ok.sum())
        excluded["one"] = int(n - ok.sum())
        if ok.any():
            yt = ens.y_final[ok]
            p_chase = estimate((yt > 1.0 - delta).astype(float))
            mean_y1 = estimate(yt)
    if branch in ("both", "hit-zero"):
        seeds = [substream(master_seed, lane_base + 1, i) for i in range(n)]
        ens = coupled_ensemble(
            "hit-zero", x0, y0, alpha, dt, seeds, stop=("horizon", math.inf),
            adaptive=adaptive, max_steps=max_steps,
        )
        ok = ens.stop_reason == "absorbed-zero"
        counts["zero"] = int(ok.sum())
        excluded["zero"] = int(n - ok.sum())
        if ok.any():
            mean_negy0 = estimate(-ens.y_final[ok])
    return ChasingReport(x0, y0, alpha, delta, p_chase, mean_y1, mean_negy0,
                         counts, excluded)


@dataclass
class EnvelopeReport:
    """Grid-point verification of the pair envelope bounds on one sample."""

    vacuous: bool
    first_phase_ok: bool
    lower_ok: bool
    ordering_ok: bool
    abs_ok: bool
    worst_first: float
    worst_lower: float
    worst_ordering: float
    worst_abs: float


def envelope_check(sample: CoupledSample, lam: float, tol_sigmas: float = 3.0) -> EnvelopeReport:
    """Check the envelope bounds along a recorded hit-1 coupled sample.

    Bounds hold with an additive slack of ``tol_sigmas`` local step standard
    deviations; the check runs up to X's first crossing of ``lam``.
    """
    if sample.mode != "hit-one":
        raise PreconditionError("envelope bounds apply to hit-1 coupled samples")
    x0, y0 = float(sample.x[0]), float(sample.y[0])
    a = sample.alpha
    e = 1.0 - a
    if not 0.0 < x0 <= 0.25:
        raise PreconditionError(f"envelope needs x0 in (0, 1/4], got {x0}")
    if not -x0 <= y0 <= x0:
        raise PreconditionError(f"envelope needs y0 in [-x0, x0], got {y0}")
    if not lam >= 4.0 * x0:
        raise PreconditionError(f"envelope needs lam >= 4 x0, got {lam}")
    if y0 == x0:
        return EnvelopeReport(True, True, True, True, True,
                              -math.inf, -math.inf, -math.inf, -math.inf)

    xs, ys, ts = sample.x, sample.y, sample.times
    stop = xs.size
    crossed = np.nonzero(xs >= lam)[0]
    if crossed.size:
        stop = int(crossed[0]) + 1
    xs, ys, ts = xs[:stop], ys[:stop], ts[:stop]
    hs = np.diff(ts, prepend=ts[0])
    sig = np.maximum(np.abs(xs) ** a, np.abs(ys) ** a)
    tol = tol_sigmas * sig * np.sqrt(hs)
    tol[0] = 0.0

    nonneg = np.nonzero(ys >= 0.0)[0]
    k_phase = int(nonneg[0]) if nonneg.size else stop
    first = slice(1, min(k_phase + 1, stop))      # t <= first time Y >= 0
    late = slice(k_phase + 1, stop)

    cap = 2.0 ** (1.0 / e) * x0
    over_first = np.maximum(xs[first], np.abs(ys[first])) - cap
    inner = np.maximum(lam ** e - xs[late] ** e, 0.0)
    env = -(inner ** (1.0 / e))
    under = env - ys[late]
    order = ys[1:] - xs[1:]
    over_abs = np.abs(ys[1:]) - lam

    def _worst(v):
        return float(v.max()) if v.size else -math.inf

    return EnvelopeReport(
        vacuous=False,
        first_phase_ok=bool(np.all(over_first <= tol[first])),
        lower_ok=bool(np.all(under <= tol[late])),
        ordering_ok=bool(np.all(order <= tol[1:])),
        abs_ok=bool(np.all(over_abs <= tol[1:])),
        worst_first=_worst(over_first),
        worst_lower=_worst(under),
        worst_ordering=_worst(order),
        worst_abs=_worst(over_abs),
    )


@dataclass
class DivergenceRow:
    dt: float
    mean_sup: float
    max_sup: float


def _scheme_pair_paths(x0, alpha, increments, dt):
    """Run the direct and transformed Euler schemes on shared increments.

    increments: (n_paths, n_steps).  Returns (xa, xb) arrays of shape
    (n_paths, n_steps + 1).  The transformed scheme integrates the signed
    power coordinate H = sgn(X)|X|^(1-a), whose drift -c/H is mollified at
    the noise scale (H^2 + theta^2 with theta = (1-a) sqrt(h)) so crossings
    of 0 stay stable; the mollification vanishes with the step.
    """
    e = 1.0 - alpha
    c = 0.5 * alpha * e
    npaths, nsteps = increments.shape
    xa = np.empty((npaths, nsteps + 1))
    xb = np.empty((npaths, nsteps + 1))
    xa[:, 0] = x0
    xb[:, 0] = x0
    theta2 = (e * math.sqrt(dt)) ** 2
    cur = np.full(npaths, float(x0))
    hcur = np.full(npaths, float(x0) ** e)
    sqh = math.sqrt(dt)
    for k in range(nsteps):
        dw = increments[:, k]
        cur = cur + np.abs(cur) ** alpha * dw
        z = cur == 0.0
        if z.any():
            cur[z] = _ZERO_NUDGE * sqh
        xa[:, k + 1] = cur
        hcur = hcur + e * dw - c * dt * hcur / (hcur * hcur + theta2)
        xb[:, k + 1] = np.sign(hcur) * np.abs(hcur) ** (1.0 / e)
    return xa, xb


def uniqueness_refinement(
    x0: float,
    alpha: float,
    dt_sequence,
    horizon: float,
    master_seed: int,
    *,
    n_paths: int = 64,
    lane: int = 0,
) -> list[DivergenceRow]:
    """Divergence of two numerically distinct schemes on shared noise.

    The same fine increments drive every row: coarse increments are exact
    block sums of the fine ones, so the table isolates scheme error.  Each
    row records sup_t |X_direct - X_transformed| on its own grid, averaged
    and maxed over the path batch.
    """
    _check_alpha(alpha)
    dts = list(dt_sequence)
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dt_sequence must be strictly decreasing")
    n_per = [round(horizon / dt) for dt in dts]
    n_fine = n_per[-1]
    for m in n_per:
        if m < 1 or n_fine % m:
            raise ValueError("each dt must subdivide the finest grid")
    fine = np.stack([
        gen_path(substream(master_seed, lane, i), n_fine, horizon / n_fine).increments
        for i in range(n_paths)
    ])
    rows = []
    for dt, m in zip(dts, n_per):
        inc = fine.reshape(n_paths, m, n_fine // m).sum(axis=2)
        xa, xb = _scheme_pair_paths(x0, alpha, inc, horizon / m)
        sup = np.max(np.abs(xa - xb), axis=1)
        rows.append(DivergenceRow(dt, float(sup.mean()), float(sup.max())))
    return rows


def pair_sample(times, x1, x2, increments, alpha) -> CoupledSample:
    """Wrap a two-scheme pair as a coupled sample for excursion analysis."""
    return CoupledSample(
        np.asarray(times), np.asarray(x1), np.asarray(x2),
        np.asarray(increments), alpha, "scheme-pair",
    )


@dataclass
class Excursion:
    t_start: float
    t_end: float
    m_peak: float
    z_max: float


@dataclass
class ExcursionReport:
    level: float
    zero_tol: float
    excursions: list
    qualifying: list

    @property
    def max_z(self) -> float | None:
        if not self.qualifying:
            return None
        return max(e.z_max for e in self.qualifying)


def excursion_agreement(sample: CoupledSample, level_b: float, zero_tol: float = 1e-4) -> ExcursionReport:
    """Per-excursion pair gap for excursions of M away from (near) zero.

    An excursion is a maximal window with M above ``zero_tol`` bounded by
    near-zero states on both sides; it qualifies when its peak reaches
    ``level_b``, and for each qualifying one the max of Z inside is reported.
    """
    m = sample.m_series()
    z = sample.z_series()
    t = sample.times
    above = m > zero_tol
    excursions = []
    i = 0
    n = m.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j < n and above[j]:
            j += 1
        if i > 0 and j < n:                 # anchored on both sides
            excursions.append(Excursion(
                float(t[i - 1]), float(t[j]),
                float(m[i:j].max()), float(z[i:j].max()),
            ))
        i = j
    qualifying = [e for e in excursions if e.m_peak >= level_b]
    return ExcursionReport(level_b, zero_tol, excursions, qualifying)
