"""Adaptive quadrature with closed-form handling of |z|^p endpoint singularities.

The integrands in this package are smooth away from isolated points where
they behave like |z|^p times a linear factor (p > -1).  Cells touching such
a point are integrated in closed form; everything else goes through an
adaptive Simpson rule with Richardson extrapolation.
"""

from __future__ import annotations

import numpy as np

from .errors import ToleranceError

__all__ = ["adaptive_quad", "power_linear_integral"]


def _simpson(f, a, fa, b, fb, m, fm):
    return (b - a) * ((fa + 4.0 * fm + fb) / 6.0)


def adaptive_quad(f, a, b, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Integrate ``f`` over [a, b] to absolute tolerance ``tol``.

    Bisects until the two-panel Simpson estimate agrees with the one-panel
    one to 15*tol (the Richardson factor), then returns the extrapolated
    value.  Raises ToleranceError when the depth budget runs out.
    """
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    fa, fb, fm = f(a), f(b), f(m)
    whole = _simpson(f, a, fa, b, fb, m, fm)
    value, achieved = _adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth)
    if achieved > tol:
        raise ToleranceError(tol, achieved)
    return value


def _adapt(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(f, a, fa, m, fm, lm, flm)
    right = _simpson(f, m, fm, b, fb, rm, frm)
    err = (left + right - whole) / 15.0
    if abs(err) <= tol or depth <= 0:
        return left + right + err, abs(err)
    lval, lerr = _adapt(f, a, fa, m, fm, lm, flm, left, tol / 2, depth - 1)
    rval, rerr = _adapt(f, m, fm, b, fb, rm, frm, right, tol / 2, depth - 1)
    return lval + rval, lerr + rerr


def power_linear_integral(p: float, c0: float, c1: float, a: float, b: float) -> float:
    """Closed form of the integral of |z|^p (c0 + c1 z) over [a, b].

    [a, b] must not contain 0 in its interior (an endpoint at 0 is fine);
    requires p > -1 so the singular factor stays integrable.
    """
    if p <= -1:
        raise ValueError(f"|z|^p not integrable through 0 for p={p}")
    if a > b:
        raise ValueError("need a <= b")
    if a < 0 < b:
        raise ValueError("interval must not straddle 0")

    def anti(z):
        # antiderivative of |z|^p (c0 + c1 z), valid on a half-line
        az = abs(z)
        s = np.sign(z)
        return s * c0 * az ** (p + 1) / (p + 1) + c1 * az ** (p + 2) / (p + 2)

    return float(anti(b) - anti(a))
