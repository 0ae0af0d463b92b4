"""Exact and semi-exact distributional quantities.

``cdf_v1`` and ``log_sf_v1`` evaluate the closed-form law of the largest jump
V_1(T) of the subordinator representation:

    P(V_1(T) <= s) = (1 + u(s))^(-theta/alpha),
    u(s) = c_alpha s^-alpha int_1^inf z^-(1+alpha) e^(-s z) dz.

Everything is carried in log space, so the deep tail (u ~ 1e-300 and below)
keeps full relative precision.

``joint_density`` evaluates the joint density of (P_1, ..., P_n). It needs
g(x) = P(P_1(alpha, theta + n alpha) <= x), which is estimated by Monte
Carlo (``estimate_g``) and can be cached on disk.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sampler import Params, PdSample, gem_statistics, log_C_n, log_c_alpha
from .special import QuadratureSpec, RngStream, log_tail_integral

__all__ = [
    "homozygosity",
    "log_u",
    "cdf_v1",
    "log_sf_v1",
    "EmpiricalCdf",
    "estimate_g",
    "load_or_estimate_g",
    "joint_density",
    "SERIES_SWITCH",
    "marginal_density_p1",
    "log_joint_density",
]

SERIES_SWITCH = 1e-8


def homozygosity(s: PdSample, m: int) -> tuple[float, float]:
    """(sum of tracked p_i^m, bound on the untracked contribution).

    The untracked atoms have total mass ``tail`` and none exceeds
    ``atom_bound``, so they contribute at most tail * atom_bound^(m-1).
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    value = float(np.sum(s.weights**m))
    return value, float(s.tail * s.atom_bound ** (m - 1))


# ---------------------------------------------------------------------------
# largest jump of the subordinator
# ---------------------------------------------------------------------------


def log_u(alpha: float, s: float, q: QuadratureSpec | None = None) -> float:
    """log of c_alpha s^-alpha int_1^inf z^-(1+alpha) e^(-s z) dz."""
    return log_c_alpha(alpha) - alpha * math.log(s) + log_tail_integral(alpha, s, q)


def _log1p_exp(x: float) -> float:
    # log(1 + e^x) without overflow
    if x > 35.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _log_log1p_exp(x: float) -> float:
    # log(log(1 + e^x)), accurate when e^x underflows
    if x < -30.0:
        # log1p(u) = u (1 - u/2 + ...)
        return x - 0.5 * math.exp(x)
    return math.log(_log1p_exp(x))


def _check(p: Params, s: float):
    p.require_large_theta()
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")


def cdf_v1(p: Params, s: float, q: QuadratureSpec | None = None) -> float:
    """P(V_1(T) <= s)."""
    _check(p, s)
    return math.exp(-(p.theta / p.alpha) * _log1p_exp(log_u(p.alpha, s, q)))


def log_sf_v1(p: Params, s: float, q: QuadratureSpec | None = None) -> float:
    """log P(V_1(T) > s).

    With E = (theta/alpha) log(1 + u), returns log(1 - e^-E). Below
    E = 1e-8 the series log E - E/2 + E^2/24 is used, with log E itself
    assembled from log u so nothing underflows.
    """
    _check(p, s)
    lu = log_u(p.alpha, s, q)
    log_e = math.log(p.theta / p.alpha) + _log_log1p_exp(lu)
    e = math.exp(log_e)
    if e < SERIES_SWITCH:
        return log_e - 0.5 * e + e * e / 24.0
    return math.log(-math.expm1(-e))


# ---------------------------------------------------------------------------
# empirical g
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalCdf:
    """Empirical distribution function of P_1(alpha, beta) samples."""

    alpha: float
    beta: float
    sorted_samples: np.ndarray
    seed: int
    path: tuple = field(default=())

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted_samples, x, side="right") / self.n
        out = np.where(x >= 1.0, 1.0, np.where(x <= 0.0, 0.0, out))
        return float(out) if out.ndim == 0 else out

    def dkw_bound(self, delta: float = 0.05) -> float:
        """Half-width of the uniform confidence band at level 1 - delta."""
        return math.sqrt(math.log(2.0 / delta) / (2.0 * self.n))

    # --- structured-text round trip ---

    def to_dict(self) -> dict:
        return {
            "kind": "empirical_cdf",
            "alpha": self.alpha,
            "beta": self.beta,
            "n": self.n,
            "seed": self.seed,
            "path": [list(item) for item in self.path],
            "sorted_samples": self.sorted_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EmpiricalCdf":
        if doc.get("kind") != "empirical_cdf":
            raise ValueError("not an empirical_cdf document")
        samples = np.asarray(doc["sorted_samples"], dtype=float)
        if samples.size != doc["n"]:
            raise ValueError("sample count does not match n")
        return cls(float(doc["alpha"]), float(doc["beta"]), samples, int(doc["seed"]),
                   tuple((str(l), int(i)) for l, i in doc["path"]))


def estimate_g(alpha: float, beta: float, n: int, stream: RngStream, *, workers: int = 1) -> EmpiricalCdf:
    """Empirical CDF of n independent draws of P_1(alpha, beta).

    Each GEM replica is extended until its residual mass falls below its
    largest atom, so every draw of P_1 is exact.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    stats = gem_statistics(Params(alpha, beta), n, stream, ms=(), top=1, workers=workers)
    samples = np.sort(stats["top"][:, 0])
    return EmpiricalCdf(alpha, beta, samples, stream.master_seed, stream.path)


def cache_key(alpha: float, beta: float, n: int, stream: RngStream) -> str:
    text = json.dumps([repr(float(alpha)), repr(float(beta)), int(n), stream.master_seed,
                       [list(x) for x in stream.path]])
    return hashlib.sha256(text.encode()).hexdigest()[:32]


def save_cdf(g: EmpiricalCdf, path: Path):
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(g.to_dict(), fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cdf(path: Path) -> EmpiricalCdf:
    with open(path) as fh:
        return EmpiricalCdf.from_dict(json.load(fh))


def load_or_estimate_g(alpha: float, beta: float, n: int, stream: RngStream,
                       cache_dir: str | os.PathLike | None = None, *, workers: int = 1) -> EmpiricalCdf:
    """``estimate_g`` behind a content-addressed cache keyed by (alpha, beta, n, stream)."""
    if cache_dir is None:
        return estimate_g(alpha, beta, n, stream, workers=workers)
    path = Path(cache_dir) / f"g-{cache_key(alpha, beta, n, stream)}.json"
    if path.exists():
        return load_cdf(path)
    g = estimate_g(alpha, beta, n, stream, workers=workers)
    save_cdf(g, path)
    return g


# ---------------------------------------------------------------------------
# joint density of the top n atoms
# ---------------------------------------------------------------------------


def log_joint_density(p: Params, point, g: EmpiricalCdf) -> float:
    p.require_large_theta()
    x = np.asarray(point, dtype=float)
    n = x.size
    if n < 1:
        raise ValueError("need at least one coordinate")
    if np.any(x <= 0) or np.any(np.diff(x) > 0):
        raise ValueError("point must satisfy p_1 >= ... >= p_n > 0")
    rest = 1.0 - math.fsum(x)
    if not rest > 0:
        raise ValueError("point must satisfy p_1 + ... + p_n < 1")
    beta = p.theta + n * p.alpha
    if not (math.isclose(g.alpha, p.alpha, rel_tol=1e-12) and math.isclose(g.beta, beta, rel_tol=1e-12)):
        raise ValueError(f"g was built for ({g.alpha}, {g.beta}), need ({p.alpha}, {beta})")
    gv = g(x[-1] / rest)
    if gv <= 0:
        return -math.inf
    return (log_C_n(p.alpha, p.theta, n) + (beta - 1.0) * math.log(rest)
            - (1.0 + p.alpha) * float(np.sum(np.log(x))) + math.log(gv))


def joint_density(p: Params, point, g: EmpiricalCdf) -> float:
    """Joint density of (P_1, ..., P_n) at ``point``; g must be for (alpha, theta + n alpha)."""
    return math.exp(log_joint_density(p, point, g))


def marginal_density_p1(p: Params, x, g: EmpiricalCdf):
    """Vectorised n = 1 density of P_1 on a grid of points in (0, 1)."""
    p.require_large_theta()
    x = np.asarray(x, dtype=float)
    beta = p.theta + p.alpha
    if not (math.isclose(g.alpha, p.alpha, rel_tol=1e-12) and math.isclose(g.beta, beta, rel_tol=1e-12)):
        raise ValueError("g does not match (alpha, theta + alpha)")
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("points must lie in (0, 1)")
    rest = 1.0 - x
    gv = g(x / rest)
    with np.errstate(divide="ignore"):
        logh = (log_C_n(p.alpha, p.theta, 1) + (beta - 1.0) * np.log(rest)
                - (1.0 + p.alpha) * np.log(x) + np.log(gv))
    return np.exp(logh)
