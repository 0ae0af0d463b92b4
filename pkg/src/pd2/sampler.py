"""Three constructions of the two-parameter Poisson-Dirichlet law PD(alpha, theta).

* GEM stick-breaking with independent Beta(1 - alpha, theta + k alpha) sticks.
* The Pitman-Yor subordinator representation: Gamma time change of a
  tempered stable subordinator, whose normalised ranked jumps are
  PD(alpha, theta) and independent of the total mass T ~ Gamma(theta, 1).
* Stable-subordinator importance sampling: ranked jumps of tau_1 normalised
  by tau_1 are PD(alpha, 0), and reweighting by tau_1^-theta gives
  PD(alpha, theta) up to the constant Gamma(theta+1)/Gamma(theta/alpha+1).

Single-draw functions return small dataclasses. The ``*_statistics``
functions run many replicas in fixed blocks and return summary arrays
(top atoms, homozygosities, totals) without materialising every atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import special as sp

from ._parallel import map_blocks
from .special import RngStream, beta_pair, log_gamma, standard_gamma

DEFAULT_TAIL_EPS = 1e-6
DEFAULT_STOP_EPS = 1e-9
DEFAULT_JUMP_FLOOR = 1e-10
MAX_STICKS = 2**26
ESS_WARNING_RATIO = 0.01

# cap on elements in one (rows x chunk) working array
_WORK = 2**22


# ---------------------------------------------------------------------------
# parameters and constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Params:
    alpha: float
    theta: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (self.theta > -self.alpha):
            raise ValueError(f"theta must exceed -alpha, got theta={self.theta!r}")

    def require_large_theta(self):
        if not self.theta > 0:
            raise ValueError(f"this operation needs theta > 0, got {self.theta!r}")
        return self


class Constants(NamedTuple):
    c_alpha: float
    C_alpha_theta: float
    C_alpha_theta_n: float


def log_c_alpha(alpha: float) -> float:
    """log of alpha / Gamma(1 - alpha), the stable Levy density constant."""
    return math.log(alpha) - log_gamma(1.0 - alpha)


def log_C(alpha: float, theta: float) -> float:
    """log Gamma(theta + 1) - log Gamma(theta/alpha + 1)."""
    if not theta > 0:
        raise ValueError("C_{alpha,theta} needs theta > 0")
    return log_gamma(theta + 1.0) - log_gamma(theta / alpha + 1.0)


def log_C_n(alpha: float, theta: float, n: int) -> float:
    """log of the normalising constant of the joint density of the top n atoms."""
    if not theta > 0:
        raise ValueError("C_{alpha,theta,n} needs theta > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (
        log_gamma(theta + 1.0)
        + log_gamma(theta / alpha + n)
        + (n - 1) * math.log(alpha)
        - log_gamma(theta + n * alpha)
        - log_gamma(theta / alpha + 1.0)
        - n * log_gamma(1.0 - alpha)
    )


def constants(p: Params, n: int = 1) -> Constants:
    """(c_alpha, C_{alpha,theta}, C_{alpha,theta,n}); the last two need theta > 0."""
    return Constants(
        math.exp(log_c_alpha(p.alpha)),
        math.exp(log_C(p.alpha, p.theta)),
        math.exp(log_C_n(p.alpha, p.theta, n)),
    )


def mean_homozygosity(alpha: float, theta: float, m: int) -> float:
    """E[H_m] under PD(alpha, theta): prod_{j=1}^{m-1} (j - alpha) / (theta + j)."""
    out = 1.0
    for j in range(1, m):
        out *= (j - alpha) / (theta + j)
    return out


# ---------------------------------------------------------------------------
# GEM
# ---------------------------------------------------------------------------


def log_gem_tail_bound(alpha: float, theta: float, n):
    """log E[(1-U_1)...(1-U_n)] = sum_i log((theta+i alpha)/(theta+i alpha+1-alpha))."""
    if not (theta > -alpha):
        raise ValueError("theta must exceed -alpha")
    n = int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= 4096:
        i = np.arange(1, n + 1)
        return -float(np.sum(np.log1p((1.0 - alpha) / (theta + i * alpha))))
    a = theta / alpha
    b = (theta + 1.0 - alpha) / alpha
    return float(sp.gammaln(n + 1 + a) - sp.gammaln(1 + a) - sp.gammaln(n + 1 + b) + sp.gammaln(1 + b))


def gem_tail_bound(alpha: float, theta: float, n: int) -> float:
    """Expected residual stick mass after n sticks."""
    return math.exp(log_gem_tail_bound(alpha, theta, n))


def _smallest_n(log_f, target: float, limit: int) -> int:
    # smallest n in [0, limit] with log_f(n) <= target for a decreasing log_f
    if log_f(0) <= target:
        return 0
    hi = 1
    while log_f(hi) > target:
        if hi >= limit:
            raise ValueError(f"more than {limit} sticks needed")
        hi = min(2 * hi, limit)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_f(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def sticks_for_tail(alpha: float, theta: float, tail_eps: float, max_sticks: int = MAX_STICKS) -> int:
    """Smallest n with gem_tail_bound(alpha, theta, n) <= tail_eps."""
    if not (0.0 < tail_eps <= 0.1):
        raise ValueError("tail_eps must lie in (0, 0.1]")
    return _smallest_n(lambda n: log_gem_tail_bound(alpha, theta, n), math.log(tail_eps), max_sticks)


def log_expected_untracked_hm(alpha: float, theta: float, m: int, n: int) -> float:
    """log E[sum over atoms beyond stick n of X_k^m].

    The residual after n sticks is r_n = prod (1 - U_i) and the remaining
    atoms are r_n times a GEM(alpha, theta + n alpha) sequence, so the
    expectation factorises into E[r_n^m] * E[H_m | PD(alpha, theta + n alpha)].
    """
    i = np.arange(1, n + 1)
    out = 0.0
    for j in range(m):
        out -= float(np.sum(np.log1p((1.0 - alpha) / (theta + i * alpha + j))))
    return out + math.log(mean_homozygosity(alpha, theta + n * alpha, m))


def sticks_for_homozygosity(alpha: float, theta: float, m: int, tol: float, max_sticks: int = 2**22) -> int:
    """Smallest n whose expected untracked H_m contribution is <= tol."""
    return _smallest_n(lambda n: log_expected_untracked_hm(alpha, theta, m, n), math.log(tol), max_sticks)


@dataclass(frozen=True)
class GemSample:
    sticks: np.ndarray
    weights: np.ndarray
    tail: float


@dataclass(frozen=True)
class PdSample:
    """Descending atoms plus the mass not represented by them.

    ``atom_bound`` is an upper bound on the size of any single untracked
    atom; it defaults to ``tail``, which is always valid.
    """

    weights: np.ndarray
    tail: float
    atom_bound: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size and (np.any(np.diff(w) > 0) or w[-1] < 0):
            raise ValueError("weights must be nonnegative and nonincreasing")
        if abs(float(np.sum(w)) + self.tail - 1.0) > 1e-12:
            raise ValueError("weights plus tail must sum to 1")
        object.__setattr__(self, "weights", w)
        if self.atom_bound is None:
            object.__setattr__(self, "atom_bound", max(float(self.tail), 0.0))


def _stick_weights(u, v):
    # X_n = (1-U_1)...(1-U_{n-1}) U_n, residual = prod (1 - U_k)
    residual = np.cumprod(v)
    before = np.concatenate([[1.0], residual[:-1]])
    return before * u, float(residual[-1]) if residual.size else 1.0


def gem_sample(p: Params, stream: RngStream, *, n: int | None = None,
               tail_eps: float | None = None, max_sticks: int = MAX_STICKS) -> GemSample:
    """One GEM(alpha, theta) draw truncated after ``n`` sticks.

    Give either a fixed stick count ``n`` or ``tail_eps``, in which case n is
    the smallest count whose expected residual mass is at most tail_eps.
    """
    if n is not None and tail_eps is not None:
        raise ValueError("give n or tail_eps, not both")
    if n is None:
        n = sticks_for_tail(p.alpha, p.theta, DEFAULT_TAIL_EPS if tail_eps is None else tail_eps, max_sticks)
    if n < 0:
        raise ValueError("n must be >= 0")
    gen = stream.generator()
    i = np.arange(1, n + 1)
    u, v = beta_pair(gen, 1.0 - p.alpha, p.theta + i * p.alpha, (n,))
    weights, tail = _stick_weights(u, v)
    return GemSample(u, weights, tail)


def rank_descending(g: GemSample) -> PdSample:
    order = np.argsort(-g.weights, kind="stable")
    return PdSample(g.weights[order], g.tail, atom_bound=g.tail)


def _gem_block(stream, count, *, alpha, theta, min_sticks, ms, top, max_sticks, exact_above=0.0):
    gen = stream.generator()
    r = np.ones(count)
    best = np.zeros((count, top))
    hm = {m: np.zeros(count) for m in ms}
    used = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    done_sticks = 0
    while active.size:
        if done_sticks < min_sticks:
            chunk = min_sticks - done_sticks
        else:
            chunk = max(8, done_sticks // 2)
        chunk = max(1, min(chunk, _WORK // active.size))
        idx = np.arange(done_sticks + 1, done_sticks + chunk + 1)
        u, v = beta_pair(gen, 1.0 - alpha, theta + idx * alpha, (active.size, chunk))
        cp = np.cumprod(v, axis=1)
        r_act = r[active]
        before = np.empty_like(cp)
        before[:, 0] = r_act
        before[:, 1:] = r_act[:, None] * cp[:, :-1]
        x = before * u
        for m in ms:
            hm[m][active] += np.sum(x**m, axis=1)
        if top == 1:
            best[active, 0] = np.maximum(best[active, 0], x.max(axis=1))
        else:
            merged = np.concatenate([best[active], x], axis=1)
            part = -np.partition(-merged, top - 1, axis=1)[:, :top]
            best[active] = -np.sort(-part, axis=1)
        r[active] = r_act * cp[:, -1]
        done_sticks += chunk
        used[active] = done_sticks
        if done_sticks >= min_sticks:
            active = active[r[active] > np.maximum(best[active, top - 1], exact_above)]
        if active.size and done_sticks > max_sticks:
            raise RuntimeError(f"GEM replicas still open after {max_sticks} sticks")
    out = {"top": best, "tail": r, "sticks": used}
    for m in ms:
        # conditional mean of the untracked atoms: r^m E[H_m | PD(alpha, theta + n alpha)]
        rest = np.ones(count)
        for j in range(1, m):
            rest *= (j - alpha) / (theta + used * alpha + j)
        out[f"h{m}"] = hm[m] + r**m * rest
    return out


def gem_statistics(p: Params, size: int, stream: RngStream, *, min_sticks: int = 0,
                   ms=(2,), top: int = 1, block: int = 4096, workers: int = 1,
                   max_sticks: int = MAX_STICKS, exact_above: float = 0.0) -> dict:
    """Top atoms and homozygosities of ``size`` GEM replicas.

    Each replica breaks at least ``min_sticks`` sticks and keeps going until
    its residual mass is no larger than its ``top``-th largest atom, at which
    point the ``top`` largest atoms are exact. ``h{m}`` holds the tracked sum
    of X_k^m plus the conditional expectation of the untracked part, which
    makes it an unbiased estimate of H_m.

    With ``exact_above`` = c > 0 a replica may also stop once its residual
    is below c. Top atoms are then exact whenever they are >= c, which is
    enough to decide events such as {P_1 >= c}.
    """
    return map_blocks(_gem_block, stream, size, block, workers, alpha=p.alpha, theta=p.theta,
                      min_sticks=min_sticks, ms=tuple(ms), top=top, max_sticks=max_sticks,
                      exact_above=exact_above)


# ---------------------------------------------------------------------------
# stable subordinator
# ---------------------------------------------------------------------------


class StableJumps(NamedTuple):
    jumps: np.ndarray
    tau: float
    tail_estimate: float


def _stable_block_raw(gen, count, alpha, stop_eps):
    """Ranked jumps of tau_1 for ``count`` independent subordinators.

    Returns flat jump values, row offsets (length count + 1), and the
    conditional mean of the mass below the last kept jump for each row.
    """
    g1 = math.gamma(1.0 - alpha)
    inv = -1.0 / alpha
    carry_g = np.zeros(count)
    carry_s = np.zeros(count)
    last = np.zeros(count)
    active = np.arange(count)
    rows_parts, vals_parts = [], []
    guess = int(1.5 * stop_eps ** (-alpha) / g1) + 16
    while active.size:
        chunk = max(4, min(guess, _WORK // active.size))
        e = gen.standard_exponential((active.size, chunk))
        arrivals = carry_g[active, None] + np.cumsum(e, axis=1)
        v = (g1 * arrivals) ** inv
        partial = carry_s[active, None] + np.cumsum(v, axis=1)
        hit = v < stop_eps * partial
        stopped = hit.any(axis=1)
        first = np.where(stopped, hit.argmax(axis=1), chunk - 1)
        keep = np.arange(chunk)[None, :] <= first[:, None]
        rows_parts.append(np.broadcast_to(active[:, None], keep.shape)[keep])
        vals_parts.append(v[keep])
        fin = active[stopped]
        last[fin] = v[stopped, first[stopped]]
        carry_s[fin] = partial[stopped, first[stopped]]
        cont = ~stopped
        carry_g[active[cont]] = arrivals[cont, -1]
        carry_s[active[cont]] = partial[cont, -1]
        active = active[cont]
        guess *= 2
    rows = np.concatenate(rows_parts)
    vals = np.concatenate(vals_parts)
    order = np.argsort(rows, kind="stable")
    offsets = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=count))])
    c_alpha = alpha / g1
    tail = c_alpha * last ** (1.0 - alpha) / (1.0 - alpha)
    return vals[order], offsets, carry_s, tail, last


def stable_ranked_jumps(alpha: float, stream: RngStream, stop_eps: float = DEFAULT_STOP_EPS) -> StableJumps:
    """Ranked jumps of a stable subordinator at time 1 by Levy-tail inversion.

    V_k = (Gamma(1-alpha) Gamma_k)^(-1/alpha) for Poisson arrival times
    Gamma_k. Generation stops at the first jump below stop_eps times the
    running sum (that jump is kept); tau adds the conditional mean of the
    remaining mass.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if not (0.0 < stop_eps <= 1e-2):
        raise ValueError("stop_eps must lie in (0, 1e-2]")
    vals, _, partial, tail, _ = _stable_block_raw(stream.generator(), 1, alpha, stop_eps)
    return StableJumps(vals, float(partial[0] + tail[0]), float(tail[0]))


def _moments_ragged(vals, offsets, ms):
    # per-row sums of vals**m; rows may be empty
    count = offsets.size - 1
    rows = np.repeat(np.arange(count), np.diff(offsets))
    return {m: np.bincount(rows, weights=vals**m, minlength=count) for m in ms}


def _stable_stats_block(stream, count, *, alpha, theta, stop_eps, ms):
    vals, offsets, partial, tail, last = _stable_block_raw(stream.generator(), count, alpha, stop_eps)
    tau = partial + tail
    c_alpha = alpha / math.gamma(1.0 - alpha)
    out = {"tau": tau, "log_weight": -theta * np.log(tau), "p1": vals[offsets[:-1]] / tau}
    for m, s in _moments_ragged(vals, offsets, ms).items():
        # add the conditional mean of sum V^m over jumps below the last kept one
        out[f"h{m}"] = (s + c_alpha * last ** (m - alpha) / (m - alpha)) / tau**m
    return out


def importance_statistics(p: Params, size: int, stream: RngStream, *, stop_eps: float = DEFAULT_STOP_EPS,
                          ms=(2,), block: int = 1024, workers: int = 1) -> dict:
    """tau_1, log weights -theta log tau_1, P_1 and H_m of PD(alpha, 0) particles."""
    if p.theta < 0:
        raise ValueError("importance sampling needs theta >= 0")
    return map_blocks(_stable_stats_block, stream, size, block, workers, alpha=p.alpha,
                      theta=p.theta, stop_eps=stop_eps, ms=tuple(ms))


@dataclass
class WeightedEnsemble:
    """PD(alpha, 0) particles with importance log-weights -theta log tau_1."""

    particles: list
    tau: np.ndarray
    log_weight: np.ndarray
    alpha: float
    theta: float
    ess_warning: str | None = field(default=None)

    def normalized_weights(self) -> np.ndarray:
        w = np.exp(self.log_weight - self.log_weight.max())
        return w / w.sum()

    @property
    def ess(self) -> float:
        w = self.normalized_weights()
        return float(1.0 / np.sum(w**2))

    def _values(self, f):
        return np.array([f(s) for s in self.particles], dtype=float)

    def estimate(self, f: Callable[[PdSample], float], normalization: str = "self") -> tuple[float, float]:
        """(estimate, standard error) of E_{alpha,theta}[f].

        ``normalization="self"`` divides by the summed weights;
        ``normalization="exact"`` multiplies the plain weighted mean by
        C_{alpha,theta} instead.
        """
        return weighted_estimate(self._values(f), self.log_weight, self.alpha, self.theta, normalization)


def weighted_estimate(values, log_weight, alpha, theta, normalization="self"):
    values = np.asarray(values, dtype=float)
    n = values.size
    if normalization == "self":
        w = np.exp(log_weight - np.max(log_weight))
        w /= w.sum()
        est = float(np.dot(w, values))
        se = float(np.sqrt(np.sum(w**2 * (values - est) ** 2)))
        return est, se
    if normalization == "exact":
        c = math.exp(log_C(alpha, theta)) if theta > 0 else 1.0
        wf = np.exp(log_weight) * values * c
        return float(wf.mean()), float(wf.std(ddof=1) / math.sqrt(n))
    raise ValueError(f"unknown normalization {normalization!r}")


def importance_ensemble(p: Params, n_particles: int, stream: RngStream,
                        stop_eps: float = DEFAULT_STOP_EPS, block: int = 1024) -> WeightedEnsemble:
    """Weighted PD(alpha, 0) particles targeting PD(alpha, theta)."""
    if p.theta < 0:
        raise ValueError("importance sampling needs theta >= 0")
    if not (0.0 < stop_eps <= 1e-2):
        raise ValueError("stop_eps must lie in (0, 1e-2]")
    particles, taus = [], []
    from ._parallel import block_tasks

    for sub, count in block_tasks(stream, n_particles, block):
        vals, offsets, partial, tail, last = _stable_block_raw(sub.generator(), count, p.alpha, stop_eps)
        tau = partial + tail
        for i in range(count):
            jumps = vals[offsets[i]:offsets[i + 1]]
            particles.append(PdSample(jumps / tau[i], float(tail[i] / tau[i]), atom_bound=float(last[i] / tau[i])))
        taus.append(tau)
    tau = np.concatenate(taus) if taus else np.zeros(0)
    ens = WeightedEnsemble(particles, tau, -p.theta * np.log(tau), p.alpha, p.theta)
    if n_particles and ens.ess / n_particles < ESS_WARNING_RATIO:
        ens.ess_warning = f"effective sample size {ens.ess:.1f} is below {ESS_WARNING_RATIO:.0%} of {n_particles} particles"
    return ens


# ---------------------------------------------------------------------------
# tempered stable / Gamma subordinator representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubordinatorDraw:
    """Jumps of the tempered stable subordinator over the random time zeta.

    ``total`` is the sum of the simulated jumps; ``truncation_bound`` is the
    expected mass of the stable jumps below the floor, which dominates the
    tempered mass that was not simulated.
    """

    zeta: float
    total: float
    jumps: np.ndarray
    truncation_bound: float
    untracked_mean: float

    def normalized(self) -> PdSample:
        """V_i / T with the expected untracked mass folded into T and the tail."""
        mass = self.total + self.untracked_mean
        floor = self.jumps[-1] if self.jumps.size else self.untracked_mean
        return PdSample(self.jumps / mass, self.untracked_mean / mass, atom_bound=float(floor / mass))


def _untracked_tempered_mass(alpha, zeta, floor, levy_scale=1.0):
    # zeta * alpha * C * int_0^floor x^-alpha e^-x dx
    return zeta * alpha * levy_scale * math.gamma(1.0 - alpha) * sp.gammainc(1.0 - alpha, floor)


def _subordinator_block_raw(gen, count, alpha, theta, floor, levy_scale, ranked=True):
    g1 = math.gamma(1.0 - alpha)
    gam = standard_gamma(gen, theta / alpha, (count,))
    zeta = gam / (levy_scale * g1)
    scale = zeta * levy_scale
    # candidates: Poisson process of the stable measure zeta alpha C x^-(1+alpha) dx
    # above the floor; its mass is lam and the point at Levy-tail level g is (zeta C / g)^(1/alpha)
    lam = scale * floor ** (-alpha)
    rows = np.repeat(np.arange(count), gen.poisson(lam))
    level = gen.random(rows.size) * lam[rows]
    with np.errstate(divide="ignore", over="ignore"):
        v = (scale[rows] / level) ** (1.0 / alpha)
    keep = gen.random(rows.size) < np.exp(-v)
    rows, v = rows[keep], v[keep]
    if ranked:
        order = np.lexsort((-v, rows))
        rows, v = rows[order], v[order]
    offsets = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=count))])
    # mass of the dominating stable measure below the floor
    bound = zeta * levy_scale * alpha * floor ** (1.0 - alpha) / (1.0 - alpha)
    untracked = _untracked_tempered_mass(alpha, zeta, floor, levy_scale)
    return zeta, v, rows, offsets, bound, untracked


def sample_pd_subordinator(p: Params, stream: RngStream, jump_floor: float = DEFAULT_JUMP_FLOOR,
                           *, levy_scale: float = 1.0) -> SubordinatorDraw:
    """One draw of (zeta, T, ranked jumps) by thinning stable candidates.

    ``levy_scale`` is the free constant C of the representation. Any C gives
    the same law; it exists for checking that claim.
    """
    p.require_large_theta()
    if not (0.0 < jump_floor <= 1e-6):
        raise ValueError("jump_floor must lie in (0, 1e-6]")
    zeta, vals, _, _, bound, untracked = _subordinator_block_raw(
        stream.generator(), 1, p.alpha, p.theta, jump_floor, levy_scale)
    return SubordinatorDraw(float(zeta[0]), float(vals.sum()), vals, float(bound[0]), float(untracked[0]))


def _subordinator_stats_block(stream, count, *, alpha, theta, floor, ms, levy_scale):
    zeta, vals, rows, _, bound, untracked = _subordinator_block_raw(
        stream.generator(), count, alpha, theta, floor, levy_scale, ranked=False)
    total = np.bincount(rows, weights=vals, minlength=count)
    mass = total + untracked
    first = np.zeros(count)
    np.maximum.at(first, rows, vals)
    out = {"zeta": zeta, "total": total, "mass": mass, "bound": bound, "p1": first / mass}
    for m in ms:
        out[f"h{m}"] = np.bincount(rows, weights=vals**m, minlength=count) / mass**m
    return out


def subordinator_statistics(p: Params, size: int, stream: RngStream, *, jump_floor: float = DEFAULT_JUMP_FLOOR,
                            ms=(2,), block: int = 1024, workers: int = 1, levy_scale: float = 1.0) -> dict:
    """zeta, T, compensated mass, P_1 = V_1/T and H_m(V/T) for ``size`` draws.

    ``total`` is the simulated jump sum; ``mass`` adds the expected
    untracked mass and is the normaliser for ``p1`` and ``h{m}``.
    """
    p.require_large_theta()
    if not (0.0 < jump_floor <= 1e-6):
        raise ValueError("jump_floor must lie in (0, 1e-6]")
    return map_blocks(_subordinator_stats_block, stream, size, block, workers, alpha=p.alpha,
                      theta=p.theta, floor=jump_floor, ms=tuple(ms), levy_scale=levy_scale)
