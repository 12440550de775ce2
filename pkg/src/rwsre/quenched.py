"""Quenched potentials and exact crossing-time moments for a fixed environment.

For a fixed environment the passage time from marked site S_{k-1} to S_k
splits into a right part (time spent in (S_{k-1}, S_k] plus entries into
S_{k-1} from the right) and a left part (time spent below S_{k-1} plus
entries from the left).  All first and second moments below are exact
functions of the gaps, the drifts and the two-sided potential

    W_j = sum_{k <= j} xi_k * prod_{i=k..j} rho_i,

computed by the recursion W_j = rho_j (xi_j + W_{j-1}) from an absorbing-zero
seed at the left window edge, with a certified geometric-decay truncation
bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment


@dataclass(frozen=True)
class Potentials:
    """Cached potential arrays for one environment.

    ``W[k]`` and the excursion variance ``VF[k]`` (variance of a single left
    excursion from S_k) are stored at slot ``k - k_min``; ``clr[k]`` holds
    cumulative log rho so that products ``Pi_{i,j} = prod_{l=i..j} rho_l``
    are formed in the log domain.
    """

    env: Environment
    W: np.ndarray
    VF: np.ndarray
    clr: np.ndarray
    w_err: np.ndarray  # certified upper bound on the truncation error of W
    tol: float

    def _slot(self, k: int) -> int:
        return self.env._slot(k)

    def w_at(self, k: int) -> float:
        """W_k; defined for k_min - 1 <= k <= n_right (seed value 0 below)."""
        if k == self.env.k_min - 1:
            return 0.0
        return float(self.W[self._slot(k)])

    def vf_at(self, k: int) -> float:
        if k == self.env.k_min - 1:
            return 0.0
        return float(self.VF[self._slot(k)])

    def log_pi(self, i: int, j: int) -> float:
        """log Pi_{i,j}; empty products (j < i) give 0."""
        if j < i:
            return 0.0
        lo = 0.0 if i == self.env.k_min else float(self.clr[self._slot(i) - 1])
        return float(self.clr[self._slot(j)]) - lo

    def pi(self, i: int, j: int) -> float:
        """Pi_{i,j} = prod_{l=i..j} rho_l."""
        return float(np.exp(self.log_pi(i, j)))

    def r(self, i: int, j: int) -> float:
        """R_{i,j} = sum_{k=i..j} xi_k Pi_{i,k-1}; empty ranges give 0."""
        if j < i:
            return 0.0
        si, sj = self._slot(i), self._slot(j)
        lo = 0.0 if si == 0 else self.clr[si - 1]
        logs = np.concatenate(([0.0], self.clr[si:sj] - lo))
        ref = logs.max()
        return float(np.exp(ref) * np.sum(self.env.xi[si : sj + 1] * np.exp(logs - ref)))

    @property
    def trunc_err_bound(self) -> float:
        """Worst certified W truncation error over the indices k >= 0 that the
        moment formulas actually use (the left extension itself is the
        burn-in region and is intentionally unconverged near its edge)."""
        lo = self._slot(0) if self.env.k_min <= 0 else 0
        return float(self.w_err[lo:].max())


def compute_potentials(env: Environment, tol: float | None = None) -> Potentials:
    """Compute W, the excursion variances VF, and cumulative log rho.

    The excursion F_k from S_k is built by splicing deeper excursions from
    S_{k-1} into a symmetric segment excursion on the gap: the segment walk
    (forced left step, reflected at S_{k-1}, absorbed on return to S_k) has
    duration D and makes M visits to S_{k-1}, with

        E D = 2 xi,  Var D = (4/3) xi (2 xi - 1)(xi - 1),
        E M = 1,     Var M = 2 (xi - 1),  Cov(D, M) = 2 xi (xi - 1),

    and each visit inserts a geometric (mean rho_{k-1}) batch of independent
    copies of F_{k-1}.  Compounding gives the exact recursion

        Var F_k = Var D + rho (Var F_{k-1}) + rho (1 + rho) (E F_{k-1})^2
                  + 8 (xi - 1) W_{k-1}^2 + 8 xi (xi - 1) W_{k-1}.

    The truncation error of W_j is exactly Pi_{k_min,j} times the true (but
    unobserved) W just below the window; the certified bound substitutes
    ``max(W) + mean(xi) + 1`` for that unobserved value.  VF inherits the
    same geometric burn-in from its zero seed.
    """
    tol = env.w_tol if tol is None else tol
    xi = env.xi.astype(np.float64)
    rho = env.rho
    n = len(xi)

    W = np.empty(n)
    VF = np.empty(n)
    w_prev = 0.0  # absorbing-zero seed at the left window edge
    f_prev = 0.0
    v_prev = 0.0
    for i in range(n):
        x = xi[i]
        W[i] = rho[i] * (x + w_prev)
        var_d = (4.0 / 3.0) * x * (2.0 * x - 1.0) * (x - 1.0)
        if i == 0:
            VF[i] = var_d
        else:
            rp = rho[i - 1]
            VF[i] = (
                var_d
                + rp * v_prev
                + rp * (1.0 + rp) * f_prev * f_prev
                + 8.0 * (x - 1.0) * w_prev * w_prev
                + 8.0 * x * (x - 1.0) * w_prev
            )
        f_prev = 2.0 * (x + w_prev)
        w_prev = W[i]
        v_prev = VF[i]

    clr = np.cumsum(np.log(rho))
    w_cap = float(W.max()) + float(xi.mean()) + 1.0
    w_err = np.exp(clr) * w_cap

    pot = Potentials(env=env, W=W, VF=VF, clr=clr, w_err=w_err, tol=tol)
    left_prod = float(np.exp(pot.log_pi(env.k_min, 0))) if env.k_min <= 0 else 1.0
    if left_prod * w_cap > max(tol, 1e-6) * max(1.0, float(W.max())):
        # window too short for the requested tolerance; keep going but flag it
        object.__setattr__(pot, "tol", left_prod * w_cap)
    return pot


# ---------------------------------------------------------------------------
# exit probabilities
# ---------------------------------------------------------------------------


def exit_probabilities(pot: Potentials, i: int, k: int, j: int) -> tuple[float, float]:
    """(P[hit S_j before S_i], P[hit S_i before S_j]) starting from S_k.

    Requires i < k < j.  Closed form: the right-exit probability is
    R_{i+1,k} / R_{i+1,j} and the left one is Pi_{i+1,k} R_{k+1,j} / R_{i+1,j}.
    """
    if not (i < k < j):
        raise ValueError("need i < k < j")
    denom = pot.r(i + 1, j)
    p_right = pot.r(i + 1, k) / denom
    p_left = pot.pi(i + 1, k) * pot.r(k + 1, j) / denom
    return p_right, p_left


# ---------------------------------------------------------------------------
# crossing moments
# ---------------------------------------------------------------------------


def crossing_mean(pot: Potentials, k: int) -> tuple[float, float, float]:
    """(mean total, mean left part, mean right part) of crossing k.

    The right part of the crossing from S_{k-1} to S_k has mean xi_k^2 and
    the left part 2 xi_k W_{k-1}.
    """
    xi = float(pot.env.xi_at(k))
    left = 2.0 * xi * pot.w_at(k - 1)
    right = xi * xi
    return left + right, left, right


def right_crossing_variance(xi_k: float) -> float:
    """Variance (2/3)(xi^4 - xi^2) of the right part of a crossing."""
    return (2.0 / 3.0) * (xi_k**4 - xi_k**2)


def excursion_moments(pot: Potentials, k: int) -> tuple[float, float]:
    """(mean, variance) of a single left excursion from S_k.

    The mean is 2 (xi_k + W_{k-1}); the variance comes from the exact
    splice recursion cached in ``pot.VF`` (see ``compute_potentials``).
    """
    xi = float(pot.env.xi_at(k))
    w = pot.w_at(k - 1)
    mean = 2.0 * (xi + w)
    return mean, pot.vf_at(k)


def left_crossing_moments(pot: Potentials, k: int) -> tuple[float, float]:
    """(mean, variance) of the left part of crossing k.

    The left part is a geometric number (mean xi_k - 1, counting the visits
    to S_{k-1} during the crossing) of bundles, each a geometric number
    (mean rho_{k-1}) of excursions from S_{k-1}.  With K the total excursion
    count, E K = xi_k rho_{k-1} and Var K = xi_k rho_{k-1} + xi_k^2
    rho_{k-1}^2, so

        mean = xi_k rho_{k-1} E F = 2 xi_k W_{k-1},
        var  = xi_k rho_{k-1} Var F
               + (xi_k^2 rho_{k-1}^2 + xi_k rho_{k-1}) (E F)^2,

    with (E F, Var F) the excursion moments at S_{k-1}.
    """
    xi = float(pot.env.xi_at(k))
    rho = pot.env.rho_at(k - 1)
    ef, vf = excursion_moments(pot, k - 1)
    mean = xi * rho * ef
    var = xi * rho * vf + (xi * xi * rho * rho + xi * rho) * ef * ef
    return mean, var


def crossing_moments(pot: Potentials, k: int) -> dict:
    """All exact first/second moments of crossing k in one dict."""
    xi = float(pot.env.xi_at(k))
    mean_l, var_l = left_crossing_moments(pot, k)
    mean_r = xi * xi
    var_r = right_crossing_variance(xi)
    # no total variance: the two parts are dependent through the shared
    # number of visits to the left anchor
    return {
        "mean": mean_l + mean_r,
        "mean_left": mean_l,
        "mean_right": mean_r,
        "var_left": var_l,
        "var_right": var_r,
    }


# ---------------------------------------------------------------------------
# barrier visits and censored excess
# ---------------------------------------------------------------------------


def barrier_visit_moments(pot: Potentials, p: int, k: int) -> tuple[float, float]:
    """(mean, variance) of the number of entries into S_p from the right
    during crossing k, for p < k.
    """
    if not (p < k):
        raise ValueError("need p < k")
    xi = float(pot.env.xi_at(k))
    mu = xi * pot.pi(p + 1, k - 1)
    var = mu * (2.0 * pot.r(p + 1, k - 1) + mu - 1.0)
    return mu, var


def censored_excess_moments(pot: Potentials, p: int, k: int) -> tuple[float, float]:
    """(mean, variance) of the time crossing k spends at or below S_p.

    Censoring the walk at S_p removes a geometric number of excursion
    bundles; the removed time has mean 2 xi_k Pi_{p+1,k-1} W_p and the stated
    second moment.
    """
    if not (p < k):
        raise ValueError("need p < k")
    xi = float(pot.env.xi_at(k))
    mean = 2.0 * xi * pot.pi(p + 1, k - 1) * pot.w_at(p)
    ef, vf = excursion_moments(pot, p)
    lead = xi * pot.pi(p, k - 1)
    var = lead * vf + lead * ef * ef * (1.0 + 2.0 * pot.env.rho_at(p) * pot.r(p + 1, k - 1) + lead)
    return mean, var


# ---------------------------------------------------------------------------
# cumulative moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuenchedMoments:
    """Per-crossing and cumulative exact moments for crossings 1..n."""

    env: Environment
    k: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    W_prev: np.ndarray  # W_{k-1}
    mean_left: np.ndarray
    mean_right: np.ndarray
    var_left: np.ndarray
    var_right: np.ndarray
    cum_mean: np.ndarray
    cum_var_left: np.ndarray
    cum_var_right: np.ndarray
    trunc_err: float

    def expected_passage(self, m: int) -> float:
        """E_omega T_m for any integer target 0 <= m <= S_n."""
        return expected_passage_time(self._pot, m)

    @property
    def _pot(self) -> Potentials:
        return self.__dict__["_pot_cache"]


def cumulative_moments(pot: Potentials, n: int) -> QuenchedMoments:
    """Exact per-crossing moments and prefix sums for crossings k = 1..n."""
    env = pot.env
    if n > env.n_right:
        raise ValueError("environment window too short")
    ks = np.arange(1, n + 1)
    xi = env.xi[env._slot(1) : env._slot(n) + 1].astype(float)
    lam = env.lam[env._slot(1) : env._slot(n) + 1]
    mean_l = np.empty(n)
    var_l = np.empty(n)
    w_prev = np.empty(n)
    for i, k in enumerate(ks):
        mean_l[i], var_l[i] = left_crossing_moments(pot, int(k))
        w_prev[i] = pot.w_at(int(k) - 1)
    mean_r = xi * xi
    var_r = (2.0 / 3.0) * (xi**4 - xi**2)
    qm = QuenchedMoments(
        env=env,
        k=ks,
        xi=xi,
        lam=lam,
        W_prev=w_prev,
        mean_left=mean_l,
        mean_right=mean_r,
        var_left=var_l,
        var_right=var_r,
        cum_mean=np.cumsum(mean_l + mean_r),
        cum_var_left=np.cumsum(var_l),
        cum_var_right=np.cumsum(var_r),
        trunc_err=pot.trunc_err_bound,
    )
    qm.__dict__["_pot_cache"] = pot
    return qm


def expected_passage_time(pot: Potentials, m: int) -> float:
    """E_omega T_m for an arbitrary integer target m >= 0.

    Sums the crossing means up to the last marked site S_{nu-1} at or below m
    and adds the partial stretch (m - S_{nu-1})^2 + 2 (m - S_{nu-1}) W_{nu-1}.
    """
    env = pot.env
    if m < 0:
        raise ValueError("target must be >= 0")
    if m == 0:
        return 0.0
    nu = env.nu(m)
    total = 0.0
    for k in range(1, nu):
        t, _, _ = crossing_mean(pot, k)
        total += t
    gap = m - env.site(nu - 1)
    if gap > 0:
        total += gap * gap + 2.0 * gap * pot.w_at(nu - 1)
    return total
