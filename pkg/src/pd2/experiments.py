"""Numerical checks of the large-theta and small-parameter limit theorems.

The V_1 moderate-deviation scan is exact: it evaluates the closed-form
survival function and involves no randomness. Every Monte Carlo routine
takes an RngStream. Each scan row gets its own substream, and each row's
replicas are split into fixed blocks (see ``pd2._parallel``), so the
tables do not depend on the worker count.

Monte Carlo rows with fewer than ``MIN_HITS`` event hits are flagged
``insufficient`` and their log-probability is left empty. They are never
reported as zero probability.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .analytics import log_sf_v1
from .asymptotics import (
    ScalingPlan,
    beta_shift,
    contracted_rate,
    rate_J1,
    sigma2,
    small_scales,
    validate_scaling,
)
from .sampler import (
    Params,
    gem_statistics,
    importance_statistics,
    log_C,
    mean_homozygosity,
    sticks_for_homozygosity,
    subordinator_statistics,
    weighted_estimate,
)
from .special import QuadratureError, QuadratureSpec, RngStream, log_gamma
from .tables import Table

MIN_HITS = 50
DEVIATION_COLUMNS = ["driver", "threshold", "log_prob", "speed", "scaled", "theory", "std_err", "hits", "flag"]


def deviation_table(extra=(), **metadata) -> Table:
    """Empty table with the standard deviation columns plus ``extra``.

    ``theory`` holds the rate-function value, so ``scaled`` should approach
    ``-theory``.
    """
    return Table(DEVIATION_COLUMNS + list(extra), [], dict(metadata))


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict
    seed: int | None = None
    replicas: int | None = None
    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, grid in self.grids.items():
            if len(grid) == 0:
                raise ValueError(f"grid {name!r} is empty")
        if self.replicas is not None and self.replicas < 100:
            raise ValueError("replica count must be >= 100")

    def digest(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), default=float)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self) -> dict:
        out = {"command": self.command, "version": __version__, "config_hash": self.digest()}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


class ScanError(RuntimeError):
    """A scan row failed numerically; ``table`` holds the rows done so far."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


def _mc_row(hits: int, n: int, speed: float):
    # (log_prob, scaled, std_err of scaled, flag)
    if hits < MIN_HITS:
        return None, None, None, "insufficient"
    prob = hits / n
    log_prob = math.log(prob)
    se = speed * math.sqrt(max(1.0 - prob, 0.0) / hits)
    return log_prob, speed * log_prob, se, ""


# ---------------------------------------------------------------------------
# large theta: atoms
# ---------------------------------------------------------------------------


def v1_scaled_log_sf(alpha: float, plan: ScalingPlan, x: float, theta: float,
                     q: QuadratureSpec | None = None) -> tuple[float, float, float]:
    """(s, log P(V_1 > s), speed) at s = theta x / a(theta) + beta(alpha, theta)."""
    a = float(plan.a(theta))
    s = theta * x / a + beta_shift(alpha, theta)
    log_prob = log_sf_v1(Params(alpha, theta), s, q) if s > 0 else 0.0
    return s, log_prob, a / theta


def mdp_v1_scan(alpha: float, plan: ScalingPlan, x: float, theta_grid, q: QuadratureSpec | None = None) -> Table:
    """Exact (a/theta) log P(a (V_1 - beta)/theta >= x) along a theta grid.

    ``theory`` is J_1(x) = x for x >= 0 and 0 for x < 0, where the event
    covers the bulk. For x >= 0, a row whose scaled value moves away from -x
    relative to the previous row (from theta >= 1e3 on) is flagged
    ``nonmonotone``.
    """
    check = validate_scaling(plan)
    if plan.kind != "MDP3" or not check.passed:
        raise ValueError(f"mdp_v1_scan needs an admissible MDP3 scaling: {check.reason}")
    grid = sorted(float(t) for t in theta_grid)
    if not grid:
        raise ValueError("theta grid is empty")
    if grid[0] <= math.e:
        raise ValueError("theta grid entries must exceed e")
    table = deviation_table(extra=["s"], alpha=alpha, rho=plan.rho, kind=plan.kind, x=x)
    theory = rate_J1(x) if x >= 0 else 0.0
    previous = None
    for theta in grid:
        try:
            s, log_prob, speed = v1_scaled_log_sf(alpha, plan, x, theta, q)
        except QuadratureError as exc:
            raise ScanError(f"quadrature failed at theta={theta}: {exc}", table) from exc
        scaled = speed * log_prob
        flag = ""
        if x >= 0 and previous is not None and previous[0] >= 1e3:
            if abs(scaled + theory) > abs(previous[1] + theory):
                flag = "nonmonotone"
        table.append(driver=theta, threshold=x, log_prob=log_prob, speed=speed, scaled=scaled,
                     theory=theory, std_err=0.0, hits=None, flag=flag, s=s)
        previous = (theta, scaled)
    return table


def mdp_p1_scan(alpha: float, plan: ScalingPlan, x: float, theta_grid, replicas: int, stream: RngStream,
                *, workers: int = 1, q: QuadratureSpec | None = None) -> Table:
    """Monte Carlo (a/theta) log P(a (P_1 - beta/theta) >= x) with the exact V_1 value alongside.

    Each GEM replica runs until the event is decided exactly: its residual
    is below the running maximum or below the event level. ``v1_scaled``
    is the exact V_1 value at the same (theta, x); both have the same limit.
    """
    check = validate_scaling(plan)
    if plan.kind != "MDP3" or not check.passed:
        raise ValueError(f"mdp_p1_scan needs an admissible MDP3 scaling: {check.reason}")
    grid = sorted(float(t) for t in theta_grid)
    table = deviation_table(extra=["v1_scaled"], alpha=alpha, rho=plan.rho, kind=plan.kind, x=x,
                            replicas=replicas)
    theory = rate_J1(x) if x >= 0 else 0.0
    for row, theta in enumerate(grid):
        a = float(plan.a(theta))
        shift = beta_shift(alpha, theta)
        level = shift / theta + x / a
        # only the indicator P_1 >= level is needed, so replicas may stop below it
        draws = gem_statistics(Params(alpha, theta), replicas, stream.substream("mdp-p1", row), ms=(), top=1,
                               workers=workers, exact_above=max(level, 0.0))["top"][:, 0]
        hits = int(np.count_nonzero(draws >= level))
        speed = a / theta
        log_prob, scaled, se, flag = _mc_row(hits, replicas, speed)
        _, v1_log, _ = v1_scaled_log_sf(alpha, plan, x, theta, q)
        table.append(driver=theta, threshold=x, log_prob=log_prob, speed=speed, scaled=scaled, theory=theory,
                     std_err=se, hits=hits, flag=flag, v1_scaled=speed * v1_log)
    return table


# ---------------------------------------------------------------------------
# large theta: homozygosity
# ---------------------------------------------------------------------------


def homozygosity_scale(alpha: float, theta: float, m: int) -> float:
    """theta^(m-1) Gamma(1-alpha) / Gamma(m-alpha)."""
    return math.exp((m - 1) * math.log(theta) + log_gamma(1.0 - alpha) - log_gamma(m - alpha))


@dataclass(frozen=True)
class CltResult:
    sample_mean: float
    sample_variance: float
    target_variance: float
    se_mean: float
    se_variance: float
    replicas: int
    sticks: int


def jackknife_variance_se(w: np.ndarray) -> float:
    """Jackknife standard error of the unbiased sample variance."""
    n = w.size
    w = w - w.mean()
    s1, s2 = w.sum(), np.sum(w * w)
    loo = (s2 - w * w - (s1 - w) ** 2 / (n - 1)) / (n - 2)
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def clt_hm_check(alpha: float, m: int, theta: float, replicas: int, stream: RngStream, *,
                 hm_tol: float = 1e-9, workers: int = 1) -> CltResult:
    """Moments of sqrt(theta) (theta^(m-1) Gamma(1-alpha)/Gamma(m-alpha) H_m - 1).

    H_m comes from GEM replicas with enough sticks that the expected
    untracked contribution is at most ``hm_tol``. That contribution's
    conditional mean is also added back.
    """
    if theta < 50:
        raise ValueError("clt_hm_check is meant for theta >= 50")
    if m < 2:
        raise ValueError("m must be >= 2")
    n = sticks_for_homozygosity(alpha, theta, m, hm_tol)
    hm = gem_statistics(Params(alpha, theta), replicas, stream.substream("clt-hm"), min_sticks=n,
                        ms=(m,), workers=workers)[f"h{m}"]
    w = math.sqrt(theta) * (homozygosity_scale(alpha, theta, m) * hm - 1.0)
    return CltResult(float(w.mean()), float(w.var(ddof=1)), sigma2(alpha, m),
                     float(w.std(ddof=1) / math.sqrt(w.size)), jackknife_variance_se(w), replicas, n)


def hm_mdp_point(alpha: float, m: int, plan: ScalingPlan, z: float, theta: float, replicas: int,
                 stream: RngStream, *, hm_tol: float | None = None, workers: int = 1,
                 strict: bool = True) -> dict:
    """Diagnostic (a^2/theta) log P(a (scaled H_m - 1) >= z) against z^2/(2 sigma^2).

    Convergence at speed a^2/theta is slow, so this is a diagnostic rather
    than a gate. With ``strict=False`` a scaling that fails the
    admissibility check is still evaluated and flagged ``inadmissible``.
    """
    if plan.kind != "MDP4":
        raise ValueError("hm_mdp_point needs an MDP4 scaling")
    check = validate_scaling(plan, m)
    if strict and not check.passed:
        raise ValueError(f"hm_mdp_point needs an admissible MDP4 scaling: {check.reason}")
    a = float(plan.a(theta))
    if hm_tol is None:
        hm_tol = 1e-3 * mean_homozygosity(alpha, theta, m) / a
    n = sticks_for_homozygosity(alpha, theta, m, hm_tol)
    hm = gem_statistics(Params(alpha, theta), replicas, stream.substream("hm-mdp"), min_sticks=n,
                        ms=(m,), workers=workers)[f"h{m}"]
    y = a * (homozygosity_scale(alpha, theta, m) * hm - 1.0)
    hits = int(np.count_nonzero(y >= z))
    speed = a * a / theta
    log_prob, scaled, se, flag = _mc_row(hits, replicas, speed)
    theory = contracted_rate(z, alpha, m) if z > 0 else 0.0
    flags = [f for f in (flag, "diagnostic", "" if check.passed else "inadmissible") if f]
    return {"theta": theta, "z": z, "hits": hits, "log_prob": log_prob, "speed": speed, "scaled": scaled,
            "std_err": se, "theory": theory, "flag": ";".join(flags), "sticks": n}


# ---------------------------------------------------------------------------
# small parameters
# ---------------------------------------------------------------------------


def small_param_scan(a_grid, k: int, replicas: int, stream: RngStream, *, delta: float = 1e-3,
                     near_one: float = 0.99, workers: int = 1) -> Table:
    """b log P(P_1 < 1/k) with alpha = theta = a, against the staircase value k.

    Extra columns: the probability that P_1 > ``near_one`` and the
    probability that the two largest atoms carry at least 1 - delta of the
    mass, with the target 1 - a^1.5 for the latter.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = sorted(float(a) for a in a_grid)
    if not grid or any(not (0 < a < 1) for a in grid):
        raise ValueError("a grid must be nonempty with values in (0, 1)")
    table = deviation_table(extra=["p_near_one", "two_atom_prob", "two_atom_target", "two_atom_pass"],
                            k=k, replicas=replicas, delta=delta, near_one=near_one)
    for row, a in enumerate(grid):
        _, b = small_scales(a, a)
        top = gem_statistics(Params(a, a), replicas, stream.substream("small-ldp", row), ms=(), top=2,
                             block=65536, workers=workers)["top"]
        p1 = top[:, 0]
        if k == 1:
            hits = int(np.count_nonzero(p1 < 1.0))
        else:
            hits = int(np.count_nonzero(p1 < 1.0 / k))
        log_prob, scaled, se, flag = _mc_row(hits, replicas, b)
        two = float(np.mean(top.sum(axis=1) >= 1.0 - delta))
        target = 1.0 - a**1.5
        table.append(driver=a, threshold=1.0 / k, log_prob=log_prob, speed=b, scaled=scaled,
                     theory=float(k) if k > 1 else 0.0, std_err=se, hits=hits, flag=flag,
                     p_near_one=float(np.mean(p1 > near_one)), two_atom_prob=two, two_atom_target=target,
                     two_atom_pass=two > target)
    return table


# ---------------------------------------------------------------------------
# cross-sampler consistency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckEntry:
    name: str
    passed: bool
    value: float
    target: float
    std_err: float
    detail: str = ""


@dataclass
class Report:
    entries: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, *args, **kwargs):
        self.entries.append(CheckEntry(*args, **kwargs))

    def table(self) -> Table:
        t = Table(["check", "passed", "value", "target", "std_err", "detail"], [], dict(self.metadata))
        for e in self.entries:
            t.append(check=e.name, passed=e.passed, value=e.value, target=e.target, std_err=e.std_err,
                     detail=e.detail)
        return t


def sampler_estimates(p: Params, replicas: int, stream: RngStream, *, hm_tol: float = 1e-6,
                      stop_eps: float = 1e-6, jump_floor: float = 1e-6, workers: int = 1,
                      max_gem_sticks: int = 4096) -> dict:
    """Per-sampler (mean, std_err) of H_2 and P_1, plus the raw arrays.

    The returned dict maps each sampler name ("gem", "subordinator",
    "importance") to its estimates.
    """
    n = min(sticks_for_homozygosity(p.alpha, p.theta, 2, hm_tol), max_gem_sticks)
    gem = gem_statistics(p, replicas, stream.substream("gem"), min_sticks=n, ms=(2,), workers=workers)
    sub = subordinator_statistics(p, replicas, stream.substream("subordinator"), jump_floor=jump_floor,
                                  ms=(2,), workers=workers)
    imp = importance_statistics(p, replicas, stream.substream("importance"), stop_eps=stop_eps, ms=(2,),
                                workers=workers)

    def plain(x):
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

    return {
        "gem": {"h2": plain(gem["h2"]), "p1": plain(gem["top"][:, 0]), "raw": gem},
        "subordinator": {"h2": plain(sub["h2"]), "p1": plain(sub["p1"]), "raw": sub},
        "importance": {
            "h2": weighted_estimate(imp["h2"], imp["log_weight"], p.alpha, p.theta, "self"),
            "p1": weighted_estimate(imp["p1"], imp["log_weight"], p.alpha, p.theta, "self"),
            "raw": imp,
        },
    }


def agreement_checks(est: dict, report: Report, label: str = ""):
    names = ["gem", "subordinator", "importance"]
    for functional in ("h2", "p1"):
        for i in range(3):
            for j in range(i + 1, 3):
                (m1, s1), (m2, s2) = est[names[i]][functional], est[names[j]][functional]
                se = math.hypot(s1, s2)
                report.add(f"{label}{functional}:{names[i]}-vs-{names[j]}", abs(m1 - m2) <= 3 * se, m1 - m2, 0.0, se,
                           f"{m1:.6g} vs {m2:.6g}")


def consistency_suite(alpha: float, theta: float, replicas: int, stream: RngStream, *, workers: int = 1,
                      **settings) -> Report:
    """KS test of T, three-sampler agreement, mean weight and T/H_2 independence."""
    p = Params(alpha, theta).require_large_theta()
    report = Report(metadata={"alpha": alpha, "theta": theta, "replicas": replicas})
    est = sampler_estimates(p, replicas, stream, workers=workers, **settings)
    sub = est["subordinator"]["raw"]
    ks = stats.kstest(sub["mass"], stats.gamma(theta).cdf)
    report.add("ks:T-vs-Gamma(theta,1)", ks.pvalue > 0.01, float(ks.pvalue), 0.01, 0.0,
               f"D={ks.statistic:.4g}")
    agreement_checks(est, report)
    w = np.exp(est["importance"]["raw"]["log_weight"])
    target = math.exp(-log_C(alpha, theta))
    se = float(w.std(ddof=1) / math.sqrt(w.size))
    report.add("weight-mean:1/C", abs(w.mean() - target) <= 3 * se, float(w.mean()), target, se)
    r = float(np.corrcoef(sub["mass"], sub["h2"])[0, 1])
    se_r = 1.0 / math.sqrt(replicas)
    report.add("corr:T-vs-H2", abs(r) <= 3 * se_r, r, 0.0, se_r)
    return report
