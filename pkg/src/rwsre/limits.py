"""Samplers and evaluators for the limit objects.

The building block is the random variable theta: 2*theta is the exit time of
a standard Brownian motion from [-1, 1], with Laplace transform
E[exp(-s theta)] = 1 / cosh(sqrt(s)), E[2 theta] = 1 and Var(2 theta) = 2/3.

On top of it sit:
* G(zeta) = sum_i x_i (2 theta_i - 1) for a point measure zeta = sum delta_x_i;
* the one-sided beta-stable subordinator with Levy tail x^(-beta), sampled as
  a Poisson series truncated at a jump-size cutoff with a certified bias
  bound;
* the functionals Upsilon(h) (last value of h below 1) and F(h) built from a
  subordinator path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_PIS8 = math.pi**2 / 8.0


def theta_cdf(t, terms: int = 64):
    """P[2 theta <= t], the Brownian exit-time distribution on [-1, 1].

    Alternating series 1 - (4/pi) sum_k ((-1)^k / (2k+1)) exp(-(2k+1)^2
    pi^2 t / 8); values below t = 5e-3 are indistinguishable from 0 at double
    precision.
    """
    t = np.asarray(t, dtype=float)
    ks = np.arange(terms)
    coef = (4.0 / math.pi) * (-1.0) ** ks / (2.0 * ks + 1.0)
    rates = (2.0 * ks + 1.0) ** 2 * _PIS8
    tt = np.maximum(t, 5e-3)
    tail = np.exp(-np.multiply.outer(tt, rates)) @ coef
    out = np.where(t < 5e-3, 0.0, 1.0 - tail)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def theta_pdf(t, terms: int = 64):
    """Density of 2 theta."""
    t = np.asarray(t, dtype=float)
    ks = np.arange(terms)
    coef = (math.pi / 2.0) * (-1.0) ** ks * (2.0 * ks + 1.0)
    rates = (2.0 * ks + 1.0) ** 2 * _PIS8
    tt = np.maximum(t, 5e-3)
    out = np.exp(-np.multiply.outer(tt, rates)) @ coef
    out = np.where(t < 5e-3, 0.0, np.maximum(out, 0.0))
    return out if out.ndim else float(out)


def theta_laplace(s):
    """Exact E[exp(-s theta)] = 1 / cosh(sqrt(s)); accepts complex s."""
    return 1.0 / np.cosh(np.sqrt(np.asarray(s, dtype=complex)))


def invert_theta_cdf(u, tol: float = 1e-12) -> np.ndarray:
    """Monotone bisection of theta_cdf: t with P[2 theta <= t] = u."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.full_like(u, 5e-3)
    hi = np.full_like(u, 1.0)
    # expand upper brackets: tail decays like exp(-pi^2 t / 8)
    for _ in range(12):
        need = theta_cdf(hi) < u
        if not need.any():
            break
        hi[need] *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = theta_cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if float(np.max(hi - lo)) < tol:
            break
    return 0.5 * (lo + hi)


class ThetaSampler:
    """Sampler for theta via inversion of the exit-time distribution.

    ``method='series-inversion'`` (default) inverts the series CDF through a
    dense precomputed monotone table (built once by bisection, then linear
    interpolation in the uniform variable); ``method='bisect'`` runs the full
    bisection per draw; ``method='reflected-walk'`` uses the lattice
    approximation U_m / (2 m^2) with a reflected simple walk.
    """

    def __init__(self, method: str = "series-inversion", table_size: int = 65536,
                 reflected_m: int = 1000):
        if method not in ("series-inversion", "bisect", "reflected-walk"):
            raise ValueError(f"unknown theta sampling method {method!r}")
        self.method = method
        self.reflected_m = reflected_m
        if method == "series-inversion":
            # geometric t-grid covering the CDF from ~1e-60 to 1 - 1e-50
            t_grid = np.geomspace(5e-3, 120.0, table_size)
            u_grid = theta_cdf(t_grid)
            keep = np.concatenate(([True], np.diff(u_grid) > 0))
            self._t = t_grid[keep]
            self._u = u_grid[keep]

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draws of theta (not 2 theta)."""
        if self.method == "reflected-walk":
            from .walk import sample_reflected_passage

            m = self.reflected_m
            n = int(np.prod(size))
            u = sample_reflected_passage(m, n, rng).astype(float)
            return (u / (2.0 * m * m)).reshape(size)
        u = rng.random(size)
        if self.method == "bisect":
            return invert_theta_cdf(u).reshape(np.shape(u)) / 2.0
        return np.interp(u, self._u, self._t) / 2.0


# ---------------------------------------------------------------------------
# point measures and G
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMeasure:
    """Finite atom list of a Poisson point measure truncated at ``cutoff``.

    Tail mass above x is c * x^(-q); atoms below ``cutoff`` are dropped and
    ``bias_x2`` certifies the expected dropped sum of squares
    integral_0^cutoff x^2 d(-c x^(-q)) = c q cutoff^(2-q) / (2 - q).
    """

    x: np.ndarray
    c: float
    q: float
    cutoff: float

    @property
    def bias_x2(self) -> float:
        return self.c * self.q * self.cutoff ** (2.0 - self.q) / (2.0 - self.q)

    @property
    def g_variance(self) -> float:
        """Var[G(zeta) | zeta] = (2/3) sum x_i^2."""
        return (2.0 / 3.0) * float(np.sum(self.x**2))


def sample_poisson_pp(c: float, q: float, cutoff: float, rng: np.random.Generator) -> PointMeasure:
    """Poisson point measure with tail mass c x^(-q), atoms above ``cutoff``.

    Transforms standard Poisson arrivals: x_i = (Gamma_i / c)^(-1/q), stopped
    once x_i <= cutoff.  The expected atom count is c * cutoff^(-q).
    """
    if not (0.0 < q < 2.0):
        raise ValueError("tail exponent q must lie in (0, 2) for square-summable atoms")
    gamma_stop = c * cutoff ** (-q)
    arrivals = []
    g = 0.0
    block = max(16, int(gamma_stop) + 8)
    while g <= gamma_stop:
        e = rng.exponential(size=block)
        cs = g + np.cumsum(e)
        arrivals.append(cs[cs <= gamma_stop])
        g = float(cs[-1])
    gam = np.concatenate(arrivals) if arrivals else np.empty(0)
    x = (gam / c) ** (-1.0 / q)
    return PointMeasure(x=x, c=float(c), q=float(q), cutoff=float(cutoff))


def sample_G(pm: PointMeasure, rng: np.random.Generator, size: int,
             theta_sampler: ThetaSampler) -> np.ndarray:
    """Draws of G(zeta) = sum_i x_i (2 theta_i - 1) for the fixed atom list."""
    if pm.x.size == 0:
        return np.zeros(size)
    theta = theta_sampler.sample(rng, (size, pm.x.size))
    return (2.0 * theta - 1.0) @ pm.x


# ---------------------------------------------------------------------------
# stable subordinator paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CadlagPath:
    """Jump path on [0, horizon] with an optional compensating drift.

    Jumps below the size cutoff are not sampled individually; their exact
    mean rate beta * cutoff^(1-beta) / (1-beta) is restored as a linear drift
    (``drift`` per unit time), so only their fluctuation is lost.
    ``bias_var`` certifies that residual: the variance of the dropped jumps,
    horizon * beta * cutoff^(2-beta) / (2-beta).
    """

    times: np.ndarray
    sizes: np.ndarray
    horizon: float
    beta: float
    cutoff: float
    drift: float = 0.0

    @property
    def values(self) -> np.ndarray:
        """Path value immediately after each jump."""
        return np.cumsum(self.sizes) + self.drift * self.times

    @property
    def final(self) -> float:
        return float(self.sizes.sum()) + self.drift * self.horizon

    @property
    def bias_var(self) -> float:
        return self.horizon * self.beta * self.cutoff ** (2.0 - self.beta) / (2.0 - self.beta)

    def value_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right"))
        return float(self.sizes[:idx].sum()) + self.drift * t


def small_jump_drift(beta: float, cutoff: float) -> float:
    """Mean rate integral_0^cutoff x nu(dx) of the dropped jumps."""
    return beta * cutoff ** (1.0 - beta) / (1.0 - beta)


def sample_subordinator(beta: float, horizon: float, cutoff: float,
                        rng: np.random.Generator, compensate: bool = True) -> CadlagPath:
    """Beta-stable subordinator (Levy tail x^(-beta)) on [0, horizon].

    Jumps above ``cutoff`` are placed uniformly in time with sizes
    (Gamma_i / horizon)^(-1/beta); smaller ones are folded into the
    compensating drift (see CadlagPath).
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("subordinator index beta must lie in (0, 1)")
    pm = sample_poisson_pp(c=horizon, q=beta, cutoff=cutoff, rng=rng)
    sizes = pm.x
    times = np.sort(rng.random(sizes.size)) * horizon
    # atoms arrive size-ordered from the transform; shuffle against sorted times
    order = rng.permutation(sizes.size)
    drift = small_jump_drift(beta, cutoff) if compensate else 0.0
    return CadlagPath(times=times, sizes=sizes[order], horizon=float(horizon),
                      beta=float(beta), cutoff=float(cutoff), drift=drift)


def extend_past_level(path: CadlagPath, level: float, rng: np.random.Generator,
                      max_doublings: int = 40) -> CadlagPath:
    """Append independent increments until the path exceeds ``level``."""
    for _ in range(max_doublings):
        if path.final > level:
            return path
        add = sample_subordinator(path.beta, path.horizon, path.cutoff, rng,
                                  compensate=path.drift > 0.0)
        path = CadlagPath(
            times=np.concatenate([path.times, path.horizon + add.times]),
            sizes=np.concatenate([path.sizes, add.sizes]),
            horizon=path.horizon + add.horizon,
            beta=path.beta,
            cutoff=path.cutoff,
            drift=path.drift,
        )
    raise RuntimeError("subordinator failed to cross the level; cutoff too aggressive?")


def jump_measure(path: CadlagPath) -> PointMeasure:
    """Point measure of the jump sizes of a path (identity extraction)."""
    return PointMeasure(x=path.sizes.copy(), c=path.horizon, q=path.beta, cutoff=path.cutoff)


def upsilon(path: CadlagPath, level: float = 1.0) -> float:
    """Supremum of the path values not exceeding ``level``.

    For a pure-jump path this is the value just before the jump that crosses
    the level (or the final value if the path stays below).  When the
    compensating drift makes the path creep across the level between jumps,
    the supremum below the level is the level itself.
    """
    t_cross = inverse_subordinator_time(path, level)
    if math.isinf(t_cross):
        return path.final
    just_before = path.value_at(t_cross) - _jump_at(path, t_cross)
    return min(level, just_before) if just_before <= level else level


def _jump_at(path: CadlagPath, t: float) -> float:
    hit = path.sizes[path.times == t]
    return float(hit.sum())


def inverse_subordinator_time(path: CadlagPath, level: float) -> float:
    """First time the path strictly exceeds ``level``; inf if it never does.

    Accounts for drift creep between jumps: the crossing may happen at a jump
    or along a linear stretch.
    """
    v = path.values
    idx = np.nonzero(v > level)[0]
    t_jump = float(path.times[idx[0]]) if idx.size else math.inf
    if path.drift > 0.0:
        # value on [t_i, t_{i+1}) is v_i + drift (t - t_i); find first creep crossing
        below = np.nonzero(v <= level)[0]
        t_prev = np.concatenate(([0.0], path.times[below] if below.size else []))
        v_prev = np.concatenate(([0.0], v[below] if below.size else []))
        t_creep = t_prev + (level - v_prev) / path.drift
        nxt = np.append(path.times, path.horizon)
        idx_next = np.searchsorted(path.times, t_prev, side="right")
        ok = t_creep < np.minimum(nxt[idx_next], path.horizon)
        if ok.any():
            t_jump = min(t_jump, float(t_creep[ok].min()))
    if math.isinf(t_jump) or t_jump > path.horizon:
        return math.inf
    return t_jump


def sample_F(path: CadlagPath, rng: np.random.Generator, size: int,
             theta_sampler: ThetaSampler, level: float = 1.0) -> np.ndarray:
    """Draws of F(h) = (1 - Upsilon(h))^2 (2 theta_0 - 1)
    + sum_{k: h(t_k) <= level} x_k^2 (2 theta_k - 1).

    Jump inclusion tests the post-jump value h(t_k).
    """
    v = path.values
    keep = v <= level
    x = path.sizes[keep]
    ups = upsilon(path, level)
    w = np.concatenate(([(level - ups) ** 2], x * x))
    theta = theta_sampler.sample(rng, (size, w.size))
    return (2.0 * theta - 1.0) @ w
