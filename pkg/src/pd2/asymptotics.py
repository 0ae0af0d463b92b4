"""Scaling sequences, centering constants and rate functions.

Large-theta regime: moderate deviations of the ranked atoms (rate J_1 and its
sums) and of the homozygosity (Gaussian rate z^2 / (2 sigma^2)), including the
quadratic cumulant limit Lambda(s, t) and its Legendre transform.

Small-parameter regime (alpha, theta -> 0): the staircase rate S_1 of P_1 and
the rates S, S_n on the ordered simplex.

Rates return ``math.inf`` where they are infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .special import log_gamma

INF = math.inf
SIMPLEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# scalings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingPlan:
    """Power-law scaling a(theta) = theta^rho.

    ``kind`` is "MDP3" for the atom MDP (needs a/theta -> 0, a -> inf) or
    "MDP4" for the homozygosity MDP, which also needs a/sqrt(theta) -> 0
    and the liminf condition with exponent ``epsilon``.
    """

    kind: str
    rho: float
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in ("MDP3", "MDP4"):
            raise ValueError(f"unknown scaling kind {self.kind!r}")

    def a(self, theta):
        return np.power(theta, self.rho)


class ScalingCheck(NamedTuple):
    passed: bool
    reason: str


def validate_scaling(plan: ScalingPlan, m: int | None = None) -> ScalingCheck:
    """Check the admissibility conditions for a power-law scaling."""
    rho = plan.rho
    if plan.kind == "MDP3":
        if not rho > 0:
            return ScalingCheck(False, f"rho={rho} <= 0: a(theta) does not diverge")
        if not rho < 1:
            return ScalingCheck(False, f"rho={rho} >= 1: a(theta)/theta does not vanish")
        return ScalingCheck(True, "0 < rho < 1")
    if m is None or m < 2:
        return ScalingCheck(False, "MDP4 needs an order m >= 2")
    eps = plan.epsilon
    if not rho > 0:
        return ScalingCheck(False, f"rho={rho} <= 0: a(theta) does not diverge")
    if not rho < 0.5:
        return ScalingCheck(False, f"rho={rho} >= 1/2: a(theta)/sqrt(theta) does not vanish")
    if eps is None or not (0 < eps < 1.0 / (2 * m - 1)):
        return ScalingCheck(False, f"epsilon={eps} outside (0, 1/(2m-1)) for m={m}")
    need = (m - 1) / (2 * m - 1)
    if rho * (1.0 - eps) < need:
        return ScalingCheck(False, f"rho(1-eps)={rho * (1 - eps):.6g} < (m-1)/(2m-1)={need:.6g}")
    return ScalingCheck(True, f"rho(1-eps)={rho * (1 - eps):.6g} >= {need:.6g}")


def beta_shift(alpha: float, theta: float) -> float:
    """log theta - (alpha + 1) log log theta - log Gamma(1 - alpha)."""
    if not theta > math.e:
        raise ValueError(f"beta_shift needs theta > e, got {theta!r}")
    return math.log(theta) - (alpha + 1.0) * math.log(math.log(theta)) - log_gamma(1.0 - alpha)


def gamma_diagnostic(alpha: float, theta: float, plan: ScalingPlan) -> float:
    """a(theta) beta(alpha, theta) / theta; carries no rate meaning."""
    return float(plan.a(theta)) * beta_shift(alpha, theta) / theta


# ---------------------------------------------------------------------------
# large-theta rates
# ---------------------------------------------------------------------------


def rate_J1(x: float) -> float:
    return x if x >= 0 else INF


def rate_I(xs) -> float:
    """sum(x) if 0 <= x_n <= ... <= x_1, else infinity."""
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        return 0.0
    if x[-1] < 0 or np.any(np.diff(x) > 0):
        return INF
    return float(math.fsum(x))


def _gamma_ratios(alpha: float, m: int):
    # Gamma(m-alpha)/Gamma(1-alpha) and Gamma(2m-alpha)/Gamma(1-alpha)
    lg1 = log_gamma(1.0 - alpha)
    return math.exp(log_gamma(m - alpha) - lg1), math.exp(log_gamma(2 * m - alpha) - lg1)


def _check_am(alpha, m):
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")


def sigma2(alpha: float, m: int) -> float:
    """Variance of the homozygosity CLT limit."""
    _check_am(alpha, m)
    log_first = log_gamma(2 * m - alpha) + log_gamma(1.0 - alpha) - 2.0 * log_gamma(m - alpha)
    return math.exp(log_first) + alpha - m * m


def lambda_coefficients(alpha: float, m: int):
    """(cross, quad) with Lambda(s, t) = (s^2 + 2 cross s t + quad t^2) / 2."""
    _check_am(alpha, m)
    r1, r2 = _gamma_ratios(alpha, m)
    cross = m * r1  # Gamma(m-alpha) Gamma(m+1) / (Gamma(m) Gamma(1-alpha))
    quad = r2 + alpha * r1 * r1
    return cross, quad


def lambda_pair(s, t, alpha: float, m: int):
    cross, quad = lambda_coefficients(alpha, m)
    return 0.5 * (s * s + 2.0 * cross * s * t + quad * t * t)


def lambda_gradient(s, t, alpha: float, m: int):
    cross, quad = lambda_coefficients(alpha, m)
    return s + cross * t, cross * s + quad * t


class DegenerateFormError(ArithmeticError):
    pass


def lambda_star(x, y, alpha: float, m: int):
    """Legendre transform of lambda_pair in closed form."""
    _check_am(alpha, m)
    g1 = math.gamma(1.0 - alpha)
    gm = math.exp(log_gamma(m - alpha))
    g2m = math.exp(log_gamma(2 * m - alpha))
    det = g1 * g2m + (alpha - m * m) * gm * gm
    if not det > 0:
        raise DegenerateFormError(f"quadratic form is not positive definite (det={det!r})")
    return g1 / (2.0 * det) * ((g2m + alpha * gm * gm / g1) * x * x - 2.0 * m * gm * x * y + g1 * y * y)


def contracted_rate(z: float, alpha: float, m: int) -> float:
    """z^2 / (2 sigma^2_{alpha,m})."""
    return z * z / (2.0 * sigma2(alpha, m))


class ContractionCheck(NamedTuple):
    closed_form: float
    numeric: float
    argmin_x: float


def contracted_rate_numeric(z: float, alpha: float, m: int, tol: float = 1e-10) -> ContractionCheck:
    """Minimise lambda_star over {y Gamma(1-alpha)/Gamma(m-alpha) - m x = z} by golden section.

    The constraint line is parametrised by x, with
    y = (z + m x) Gamma(m-alpha) / Gamma(1-alpha).
    """
    r1, _ = _gamma_ratios(alpha, m)

    def on_line(x):
        return lambda_star(x, (z + m * x) * r1, alpha, m)

    scale = 1.0 + abs(z)
    res = optimize.minimize_scalar(on_line, bracket=(-10.0 * scale, 0.0, 10.0 * scale), method="golden",
                                   tol=tol)
    return ContractionCheck(contracted_rate(z, alpha, m), float(res.fun), float(res.x))


# ---------------------------------------------------------------------------
# small-parameter rates
# ---------------------------------------------------------------------------


def small_scales(alpha: float, theta: float) -> tuple[float, float]:
    """(a, b) with a = max(alpha, |theta|) and b = -1/log(a)."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    if not theta > -alpha:
        raise ValueError("theta must exceed -alpha")
    a = max(alpha, abs(theta))
    if not a < 1:
        raise ValueError(f"a(alpha, theta)={a} must be < 1")
    return a, -1.0 / math.log(a)


def rate_S1(p: float) -> float:
    """0 at p = 1, k on [1/(k+1), 1/k), infinity at p = 0."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    if p == 1.0:
        return 0.0
    if p == 0.0:
        return INF
    k = max(1, math.ceil(1.0 / p) - 1)
    # settle float edge cases against the interval endpoints as written
    while p < 1.0 / (k + 1):
        k += 1
    while k > 1 and p >= 1.0 / k:
        k -= 1
    return float(k)


def _as_weights(p):
    x = np.asarray(p, dtype=float)
    if np.any(x < 0) or np.any(np.diff(x) > 0):
        raise ValueError("weights must be nonnegative and nonincreasing")
    return x


def rate_S(p) -> float:
    """n - 1 for a probability vector with exactly n positive atoms.

    A finite vector with total mass below one cannot stand for an element of
    the finite-support set, so it gets infinity.
    """
    x = _as_weights(p)
    total = math.fsum(x)
    if total > 1.0 + SIMPLEX_TOL:
        raise ValueError("weights sum to more than 1")
    if abs(total - 1.0) > SIMPLEX_TOL:
        return INF
    return float(np.count_nonzero(x > 0) - 1)


def rate_Sn(p) -> float:
    """Finite-dimensional rate for (P_1, ..., P_n)."""
    x = _as_weights(p)
    n = x.size
    if n == 0:
        raise ValueError("need at least one coordinate")
    cums = np.array([math.fsum(x[: l + 1]) for l in range(n)])
    if abs(x[0] - 1.0) <= SIMPLEX_TOL and np.all(x[1:] == 0):
        return 0.0
    for l in range(2, n + 1):
        if abs(cums[l - 1] - 1.0) <= SIMPLEX_TOL and x[l - 1] > 0:
            return float(l - 1)
    total = cums[-1]
    if total < 1.0 - SIMPLEX_TOL and x[-1] > 0:
        ratio = min(x[-1] / (1.0 - total), 1.0)
        # snap rounding noise onto the staircase jump points 1/k
        k = round(1.0 / ratio)
        if abs(ratio - 1.0 / k) <= SIMPLEX_TOL:
            ratio = 1.0 / k
        return n + rate_S1(ratio)
    return INF
