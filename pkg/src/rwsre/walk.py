"""Passage-time simulation at three resolutions.

* direct  -- step-by-step walk on the integer lattice (exact, O(T) work);
* block   -- per-crossing sampling: the right part is a reflected-walk
             passage time, the left part a geometric number of geometric
             excursion bundles, each excursion simulated directly (exact in
             law, much cheaper than direct for large targets);
* reduced -- large-n surrogate sum_k xi_k^2 (2 theta_k - 1) over the crossed
             gaps plus the final partial stretch, with i.i.d. theta draws
             (already centered at the quenched mean).

All kernels are numba-compiled and consume 32-bit seeds drawn from the
caller's substream, so every sample is reproducible from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .environment import Environment
from .quenched import Potentials, expected_passage_time
from .rng import kernel_seed

# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _geom0(p: float) -> int:
    """Geometric count on {0,1,...} with success probability p (mean (1-p)/p)."""
    n = 0
    while np.random.random() >= p:
        n += 1
    return n


@njit(cache=True)
def _passage_steps(p_right, pos0, start, target):
    """Steps of a lattice walk from ``start`` until it first hits ``target``."""
    x = start
    t = 0
    while x != target:
        if np.random.random() < p_right[x - pos0]:
            x += 1
        else:
            x -= 1
            if x < pos0:
                return -1  # fell off the sampled window: caller must widen it
        t += 1
    return t


@njit(cache=True)
def _direct_passage_batch(p_right, pos0, start, target, n_rep, seed):
    np.random.seed(seed)
    out = np.empty(n_rep, dtype=np.int64)
    for r in range(n_rep):
        out[r] = _passage_steps(p_right, pos0, start, target)
    return out


@njit(cache=True)
def _reflected_once(m: int) -> int:
    """First passage time of |simple symmetric walk| from 0 to level m."""
    y = 0
    t = 0
    while y < m:
        if y == 0:
            y = 1
        elif np.random.random() < 0.5:
            y += 1
        else:
            y -= 1
        t += 1
    return t


@njit(cache=True)
def _reflected_batch(m, n_rep, seed):
    np.random.seed(seed)
    out = np.empty(n_rep, dtype=np.int64)
    for r in range(n_rep):
        out[r] = _reflected_once(m)
    return out


@njit(cache=True)
def _reflected_with_returns(m: int):
    """(U_m, number of returns to 0) of the reflected walk.

    The return count is exactly the number of visits the crossing pays to its
    left anchor after time 0, so it must be read off the same path as U_m:
    the left and right parts of a crossing are dependent through it.
    """
    y = 0
    t = 0
    returns = 0
    while y < m:
        if y == 0:
            y = 1
        elif np.random.random() < 0.5:
            y += 1
        else:
            y -= 1
            if y == 0:
                returns += 1
        t += 1
    return t, returns


@njit(cache=True)
def _excursion_once(p_right, pos0, s):
    """Length of one left excursion from site s (first step left included)."""
    t = _passage_steps(p_right, pos0, s - 1, s)
    if t < 0:
        return -1
    return 1 + t


@njit(cache=True)
def _excursion_batch(p_right, pos0, s, n_rep, seed):
    np.random.seed(seed)
    out = np.empty(n_rep, dtype=np.int64)
    for r in range(n_rep):
        out[r] = _excursion_once(p_right, pos0, s)
    return out


@njit(cache=True)
def _crossing_split_once(p_right, pos0, s_prev, s_k, s_p):
    """One direct crossing s_prev -> s_k with the step classifier.

    Returns (t_left, t_right, barrier_entries, censored_time): steps below
    s_prev (or entering it from the left) vs steps in (s_prev, s_k] (or
    entering s_prev from the right); entries into s_p from the right; and
    steps at or below s_p under the same entry convention.
    """
    x = s_prev
    t_l = 0
    t_r = 0
    visits = 0
    censored = 0
    while x != s_k:
        xp = x
        if np.random.random() < p_right[x - pos0]:
            x += 1
        else:
            x -= 1
            if x < pos0:
                return -1, -1, -1, -1
        if x < s_prev or (x == s_prev and xp == s_prev - 1):
            t_l += 1
        else:
            t_r += 1
        if x == s_p and xp == s_p + 1:
            visits += 1
        if x < s_p or (x == s_p and xp == s_p - 1):
            censored += 1
    return t_l, t_r, visits, censored


@njit(cache=True)
def _crossing_split_batch(p_right, pos0, s_prev, s_k, s_p, n_rep, seed):
    np.random.seed(seed)
    out = np.empty((n_rep, 4), dtype=np.int64)
    for r in range(n_rep):
        a, b, c, d = _crossing_split_once(p_right, pos0, s_prev, s_k, s_p)
        out[r, 0] = a
        out[r, 1] = b
        out[r, 2] = c
        out[r, 3] = d
    return out


@njit(cache=True)
def _block_left_part(p_right, pos0, s_prev, m_visits, lam_prev):
    """Left part of one crossing: one geometric bundle of excursions per
    visit to the anchor (m_visits returns plus the initial visit)."""
    total = 0
    for _ in range(m_visits + 1):
        n_exc = _geom0(lam_prev)
        for _ in range(n_exc):
            f = _excursion_once(p_right, pos0, s_prev)
            if f < 0:
                return -1
            total += f
    return total


@njit(cache=True)
def _block_crossing_once(p_right, pos0, s_prev, xi):
    """(t_left, t_right) of one crossing in the correct joint law."""
    t_right, m_visits = _reflected_with_returns(xi)
    t_left = _block_left_part(p_right, pos0, s_prev, m_visits, p_right[s_prev - pos0])
    return t_left, t_right


@njit(cache=True)
def _block_passage_once(p_right, pos0, sites, n):
    """One block-tier passage time to target n.

    ``sites`` holds S_0 .. S_{nu_n - 1} (marked sites in [0, n]).
    """
    total = 0
    for i in range(1, len(sites)):
        s_prev = sites[i - 1]
        t_l, t_r = _block_crossing_once(p_right, pos0, s_prev, sites[i] - s_prev)
        if t_l < 0:
            return -1
        total += t_l + t_r
    gap = n - sites[len(sites) - 1]
    if gap > 0:
        t_l, t_r = _block_crossing_once(p_right, pos0, sites[len(sites) - 1], gap)
        if t_l < 0:
            return -1
        total += t_l + t_r
    return total


@njit(cache=True)
def _block_passage_batch(p_right, pos0, sites, n, n_rep, seed):
    np.random.seed(seed)
    out = np.empty(n_rep, dtype=np.int64)
    for r in range(n_rep):
        out[r] = _block_passage_once(p_right, pos0, sites, n)
    return out


@njit(cache=True)
def _block_crossing_batch(p_right, pos0, s_prev, s_k, n_rep, seed):
    np.random.seed(seed)
    out = np.empty((n_rep, 2), dtype=np.int64)
    xi = s_k - s_prev
    for r in range(n_rep):
        t_l, t_r = _block_crossing_once(p_right, pos0, s_prev, xi)
        out[r, 0] = t_l
        out[r, 1] = t_r
    return out


# ---------------------------------------------------------------------------
# environment plumbing
# ---------------------------------------------------------------------------


def transition_array(env: Environment) -> tuple[np.ndarray, int]:
    """Per-position right-step probabilities over the sampled window.

    Returns (p_right, pos0) with p_right[x - pos0] = lambda at marked sites
    and 1/2 elsewhere.
    """
    pos0 = env.site(env.k_min)
    pos1 = env.site(env.n_right)
    p = np.full(pos1 - pos0 + 1, 0.5)
    p[env.S - pos0] = env.lam
    return p, pos0


@dataclass(frozen=True)
class PassageRecord:
    """One batch of passage-time samples to a fixed target."""

    n: int
    nu: int
    s_last: int
    tier: str
    samples: np.ndarray  # T draws (direct/block) or centered values (reduced)
    centered: bool


@dataclass(frozen=True)
class CrossingSample:
    k: int
    t_left: np.ndarray
    t_right: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.t_left + self.t_right


# ---------------------------------------------------------------------------
# public samplers
# ---------------------------------------------------------------------------


def sample_reflected_passage(m: int, replicas: int, rng: np.random.Generator) -> np.ndarray:
    """Replicas of U_m, the reflected-walk passage time to level m."""
    if m < 1:
        raise ValueError("level must be >= 1")
    out = _reflected_batch(m, replicas, kernel_seed(rng))
    return out


def direct_passage(env: Environment, n: int, replicas: int, rng: np.random.Generator) -> PassageRecord:
    """Step-by-step passage times T_n; exact but O(T) per replica."""
    p, pos0 = transition_array(env)
    nu = env.nu(n)
    out = _direct_passage_batch(p, pos0, 0, int(n), replicas, kernel_seed(rng))
    if np.any(out < 0):
        raise RuntimeError("walk fell off the left edge of the sampled window; lower w_tol")
    if np.any((out - n) % 2 != 0):
        raise AssertionError("parity violation: T_n and n must have the same parity")
    return PassageRecord(n=int(n), nu=nu, s_last=env.site(nu - 1), tier="direct",
                         samples=out, centered=False)


def direct_crossing(env: Environment, k: int, replicas: int, rng: np.random.Generator,
                    barrier: int | None = None) -> dict:
    """Direct samples of the split crossing k; optionally count entries into
    a barrier site S_p (p = barrier < k) and the time censored at S_p."""
    p, pos0 = transition_array(env)
    s_prev, s_k = env.site(k - 1), env.site(k)
    s_p = env.site(barrier) if barrier is not None else pos0 - 10  # off-window: counters stay 0
    out = _crossing_split_batch(p, pos0, s_prev, s_k, s_p, replicas, kernel_seed(rng))
    if np.any(out[:, 0] < 0):
        raise RuntimeError("walk fell off the left edge of the sampled window; lower w_tol")
    return {
        "t_left": out[:, 0],
        "t_right": out[:, 1],
        "barrier_visits": out[:, 2],
        "censored_time": out[:, 3],
    }


def sample_excursion(env: Environment, k: int, replicas: int, rng: np.random.Generator) -> np.ndarray:
    """Direct samples of a single left excursion length from S_k."""
    p, pos0 = transition_array(env)
    out = _excursion_batch(p, pos0, env.site(k), replicas, kernel_seed(rng))
    if np.any(out < 0):
        raise RuntimeError("walk fell off the left edge of the sampled window; lower w_tol")
    return out


def block_crossing(env: Environment, k: int, replicas: int, rng: np.random.Generator) -> CrossingSample:
    """Block-tier samples of crossing k (left part and right part)."""
    p, pos0 = transition_array(env)
    out = _block_crossing_batch(p, pos0, env.site(k - 1), env.site(k), replicas, kernel_seed(rng))
    if np.any(out[:, 0] < 0):
        raise RuntimeError("walk fell off the left edge of the sampled window; lower w_tol")
    return CrossingSample(k=k, t_left=out[:, 0], t_right=out[:, 1])


def block_passage(env: Environment, n: int, replicas: int, rng: np.random.Generator) -> PassageRecord:
    """Block-tier passage times T_n (exact in law, cheaper than direct)."""
    p, pos0 = transition_array(env)
    nu = env.nu(n)
    sites = env.S[env._slot(0) : env._slot(nu - 1) + 1].astype(np.int64)
    out = _block_passage_batch(p, pos0, sites, int(n), replicas, kernel_seed(rng))
    if np.any(out < 0):
        raise RuntimeError("walk fell off the left edge of the sampled window; lower w_tol")
    return PassageRecord(n=int(n), nu=nu, s_last=env.site(nu - 1), tier="block",
                         samples=out, centered=False)


def reduced_passage(
    env: Environment,
    n: int,
    replicas: int,
    rng: np.random.Generator,
    theta_sampler,
    compress_rel: float | None = None,
    chunk: int = 4_000_000,
) -> PassageRecord:
    """Reduced-tier surrogate for T_n - E_omega T_n.

    Draws sum_{k < nu_n} xi_k^2 (2 theta_k - 1) plus the final stretch
    (n - S_{nu_n - 1})^2 (2 theta_0 - 1).  When ``compress_rel`` is set,
    gaps whose variance share is below that threshold are aggregated into a
    single centered Gaussian with the exact aggregate variance (2/3) sum
    xi^4; the dominant gaps keep exact theta draws.
    """
    nu = env.nu(n)
    xi = env.xi[env._slot(1) : env._slot(nu - 1) + 1]
    s_last = env.site(nu - 1)
    out = reduced_passage_values(np.append(xi, [n - s_last + 1]), n, replicas, rng,
                                 theta_sampler, compress_rel=compress_rel, chunk=chunk)
    return PassageRecord(n=int(n), nu=nu, s_last=s_last, tier="reduced",
                         samples=out, centered=True)


def reduced_passage_values(
    xi: np.ndarray,
    n: int,
    replicas: int,
    rng: np.random.Generator,
    theta_sampler,
    compress_rel: float | None = None,
    chunk: int = 4_000_000,
) -> np.ndarray:
    """Reduced-tier draws from a bare gap sequence.

    ``xi`` holds the gaps xi_1, xi_2, ... up to and including the first gap
    whose partial sum exceeds ``n``; the last entry is replaced by the partial
    stretch to ``n`` itself.  Returns centered samples (no further centering
    needed).
    """
    xi = np.asarray(xi, dtype=np.float64)
    s_last = float(xi[:-1].sum())
    weights = xi[:-1] ** 2
    tail_gap = n - s_last
    if tail_gap > 0:
        weights = np.append(weights, float(tail_gap) ** 2)

    if compress_rel is not None and len(weights) > 64:
        w4 = weights**2
        keep = w4 >= compress_rel * w4.max()
        big = weights[keep]
        small_var = (2.0 / 3.0) * float(w4[~keep].sum())
        out = np.zeros(replicas)
        if big.size:
            theta = theta_sampler.sample(rng, (replicas, big.size))
            out += (2.0 * theta - 1.0) @ big
        if small_var > 0.0:
            out += rng.normal(0.0, np.sqrt(small_var), size=replicas)
    else:
        out = np.zeros(replicas)
        step = max(1, chunk // max(len(weights), 1))
        for lo in range(0, replicas, step):
            hi = min(lo + step, replicas)
            theta = theta_sampler.sample(rng, (hi - lo, len(weights)))
            out[lo:hi] = (2.0 * theta - 1.0) @ weights
    return out


# ---------------------------------------------------------------------------
# empirical measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Sorted sample of centered, scaled passage times for one environment."""

    values: np.ndarray
    n: int
    tier: str
    scale: float

    def ecdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / len(self.values)

    def integrate(self, f) -> float:
        return float(np.mean(f(self.values)))


def quenched_empirical_measure(
    env: Environment,
    pot: Potentials | None,
    n: int,
    replicas: int,
    tier: str,
    rng: np.random.Generator,
    scale: float,
    theta_sampler=None,
    compress_rel: float | None = None,
) -> EmpiricalMeasure:
    """(T_n - E_omega T_n) / scale as a sorted empirical sample."""
    if tier == "direct":
        rec = direct_passage(env, n, replicas, rng)
    elif tier == "block":
        rec = block_passage(env, n, replicas, rng)
    elif tier == "reduced":
        if theta_sampler is None:
            raise ValueError("reduced tier needs a theta sampler")
        rec = reduced_passage(env, n, replicas, rng, theta_sampler, compress_rel=compress_rel)
    else:
        raise ValueError(f"unknown tier {tier!r}")
    if rec.centered:
        vals = rec.samples / scale
    else:
        if pot is None:
            raise ValueError("direct/block tiers need potentials for centering")
        center = expected_passage_time(pot, n)
        vals = (rec.samples - center) / scale
    return EmpiricalMeasure(values=np.sort(vals), n=int(n), tier=tier, scale=float(scale))
