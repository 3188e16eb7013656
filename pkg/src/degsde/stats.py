"""Monte Carlo estimates, oracle comparisons, and trend tests.

Means and variances are computed by pairwise summation over the sorted
sample, so a batch reduced in any order gives the bit-identical estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

__all__ = ["Estimate", "OracleTest", "TrendResult", "estimate", "oracle_test", "trend_test"]


def z_critical(ci_level: float) -> float:
    """Two-sided normal quantile for the given confidence level."""
    if not 0 < ci_level < 1:
        raise ValueError(f"ci_level must lie in (0,1), got {ci_level}")
    return NormalDist().inv_cdf(0.5 + ci_level / 2.0)


@dataclass(frozen=True)
class Estimate:
    """Point estimate with its standard error."""

    mean: float
    stderr: float
    n: int
    ci_level: float = 0.99

    @property
    def ci(self) -> tuple[float, float]:
        half = z_critical(self.ci_level) * self.stderr
        return (self.mean - half, self.mean + half)


def estimate(samples, ci_level: float = 0.99) -> Estimate:
    """Order-independent mean / stderr of a sample batch.

    Sorting before the pairwise sum makes the result invariant, bit for bit,
    under any permutation of the input.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    mean = float(np.sum(x) / n)
    if n < 2:
        return Estimate(mean, 0.0, n, ci_level)
    var = float(np.sum((x - mean) ** 2) / (n - 1))
    return Estimate(mean, float(np.sqrt(var / n)), n, ci_level)


@dataclass(frozen=True)
class OracleTest:
    """z-comparison of an estimate against an exact oracle value."""

    estimate: Estimate
    oracle_value: float
    z_score: float
    z_max: float
    passed: bool


def oracle_test(est: Estimate, oracle_value: float, z_max: float | None = None) -> OracleTest:
    """Compare an estimate to its oracle at ``z_max`` standard errors.

    ``z_max`` defaults to the estimate's own confidence quantile.  With a
    zero standard error the comparison degenerates to exact equality.
    """
    if z_max is None:
        z_max = z_critical(est.ci_level)
    if est.stderr > 0:
        z = (est.mean - oracle_value) / est.stderr
    else:
        z = 0.0 if est.mean == oracle_value else np.copysign(np.inf, est.mean - oracle_value)
    return OracleTest(est, oracle_value, float(z), z_max, bool(abs(z) <= z_max))


@dataclass(frozen=True)
class TrendResult:
    """Verdict of a monotone-up-to-noise comparison along a sweep."""

    direction: str
    passed: bool
    pair_ok: tuple[bool, ...]


def trend_test(estimates, direction: str = "increasing") -> TrendResult:
    """Check that consecutive estimates are ordered in the claimed direction.

    A pair also passes when its means overlap within the combined 2-stderr
    bands, so statistically indistinguishable neighbors never fail the trend.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"unknown direction {direction!r}")
    ests = list(estimates)
    if len(ests) < 2:
        raise ValueError("need at least two estimates")
    ok = []
    for a, b in zip(ests, ests[1:]):
        ordered = b.mean >= a.mean if direction == "increasing" else b.mean <= a.mean
        overlap = abs(b.mean - a.mean) <= 2.0 * (a.stderr + b.stderr)
        ok.append(bool(ordered or overlap))
    return TrendResult(direction, all(ok), tuple(ok))
