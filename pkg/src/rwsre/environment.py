"""Gap and drift laws, regime checks, scaling sequences, environment sampling.

An environment is a two-sided sequence of marked sites ``S_k`` on the
integers.  Site gaps ``xi_k = S_k - S_{k-1}`` are i.i.d. positive integers
with a Pareto-ceiling tail, drifts ``lambda_k in (0,1)`` sit at the marked
sites and are i.i.d. from a finite atom law, and gaps are independent of
drifts.  Everywhere else the walk is symmetric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SCHEME_ID, substream

_MOMENT_TOL = 1e-12


@dataclass(frozen=True)
class GapLaw:
    """Integer gap law xi = ceil(V) with P[V > v] = (v/scale)^(-beta)."""

    beta: float
    scale: float = 1.0
    kind: str = "pareto_ceiling"

    def __post_init__(self):
        if self.kind != "pareto_ceiling":
            raise ValueError(f"unsupported gap law kind: {self.kind!r}")
        if not (0.0 < self.beta < 4.0):
            raise ValueError("beta must lie in (0, 4)")
        if self.scale < 1.0:
            raise ValueError("scale must be >= 1")

    # -- distribution ------------------------------------------------------

    def tail(self, k):
        """P[xi > k] for integer (or array of integer) k >= 0."""
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.where(k < self.scale, 1.0, (k / self.scale) ** (-self.beta))
        return t if t.ndim else float(t)

    def tail_real(self, v):
        """P[V > v] of the underlying continuous variable, for real v > 0."""
        v = np.asarray(v, dtype=float)
        t = np.where(v < self.scale, 1.0, (v / self.scale) ** (-self.beta))
        return t if t.ndim else float(t)

    def pmf(self, k):
        """P[xi = k] for integer k >= 1."""
        k = np.asarray(k, dtype=float)
        p = self.tail(k - 1) - self.tail(k)
        return p if np.ndim(k) else float(p)

    def support_min(self) -> int:
        return int(math.ceil(self.scale))

    # -- moments -----------------------------------------------------------

    def moment(self, gamma: float, tol: float = _MOMENT_TOL) -> float:
        """E[xi^gamma]; returns inf when gamma >= beta.

        Sums k^gamma P[xi = k] exactly up to a cutoff K, then estimates the
        remainder from the continuous law: with xi = ceil(V),
        E[xi^g; V > K] = E[V^g; V > K] + (g/2) E[V^(g-1); V > K] + O(K^(g-b-2)),
        and the closed Pareto tails make the correction certified.
        """
        if gamma >= self.beta:
            return math.inf
        if gamma == 0.0:
            return 1.0
        b, g, s = self.beta, gamma, self.scale
        total = 0.0
        k0, K = 1, 4096
        while True:
            ks = np.arange(k0, K + 1, dtype=float)
            total += float(np.sum(ks**g * (self.tail(ks - 1.0) - self.tail(ks))))
            # E[V^p ; V > K] = (K/s)^(-b) K^p b/(b-p) for p < b
            tK = (K / s) ** (-b)
            a0 = tK * K**g * b / (b - g)
            a1 = tK * K ** (g - 1.0) * b / (b - g + 1.0)
            rem = a0 + 0.5 * g * a1
            err = (abs(g) + 1.0) ** 2 * tK * K ** (g - 2.0) * b / (b - g + 2.0)
            if err <= tol * max(total + rem, 1.0):
                return total + rem
            k0, K = K + 1, min(4 * K, K + (1 << 22))

    def log_moment(self, tol: float = _MOMENT_TOL) -> float:
        """E[log xi] via E[log xi] = sum_{k>=1} log((k+1)/k) P[xi > k]."""
        b, s = self.beta, self.scale
        total = 0.0
        k0, K = 1, 4096
        while True:
            ks = np.arange(k0, K, dtype=float)
            total += float(np.sum(np.log1p(1.0 / ks) * self.tail(ks)))
            # remainder sum_{k>=K} log(1+1/k)(k/s)^-b via Euler-Maclaurin midpoint
            Km = K - 0.5
            rem = s**b * (Km ** (-b) / b - 0.5 * Km ** (-1.0 - b) / (1.0 + b))
            err = 4.0 * s**b * Km ** (-b - 2.0)
            if err <= tol * max(total + rem, 0.1):
                return total + rem
            k0, K = K, min(4 * K, K + (1 << 22))

    def truncated_mean(self, a: float) -> float:
        """E[xi ; xi <= a] for a real threshold a."""
        top = int(math.floor(a))
        if top < self.support_min():
            return 0.0
        ks = np.arange(1, top + 1, dtype=float)
        return float(np.sum(ks * (self.tail(ks - 1.0) - self.tail(ks))))

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        v = self.scale * u ** (-1.0 / self.beta)
        return np.ceil(v).astype(np.int64)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "GapLaw":
        return cls(beta=float(d["beta"]), scale=float(d.get("scale", 1.0)), kind=d.get("kind", "pareto_ceiling"))


@dataclass(frozen=True)
class DriftLaw:
    """Finite atom law for drifts lambda in (0,1): atoms ((lambda, prob), ...)."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(l), float(p)) for l, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("drift law needs at least one atom")
        for lam, p in atoms:
            if not (0.0 < lam < 1.0):
                raise ValueError("drift atoms must lie in (0, 1)")
            if p <= 0.0:
                raise ValueError("atom probabilities must be positive")
        if abs(sum(p for _, p in atoms) - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([l for l, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def rhos(self) -> np.ndarray:
        """rho = (1 - lambda) / lambda per atom."""
        lam = self.lambdas
        return (1.0 - lam) / lam

    def e_rho(self, power: float = 1.0) -> float:
        return float(np.sum(self.probs * self.rhos**power))

    def e_log_rho(self) -> float:
        return float(np.sum(self.probs * np.log(self.rhos)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.atoms), size=size, p=self.probs)
        return self.lambdas[idx]

    def to_dict(self) -> dict:
        return {"atoms": [{"lambda": l, "p": p} for l, p in self.atoms]}

    @classmethod
    def from_dict(cls, d: dict) -> "DriftLaw":
        return cls(atoms=tuple((a["lambda"], a["p"]) for a in d["atoms"]))


@dataclass(frozen=True)
class EnvironmentSpec:
    """Joint law of an environment: independent gap and drift laws."""

    gap_law: GapLaw
    drift_law: DriftLaw

    def to_dict(self) -> dict:
        return {"gap_law": self.gap_law.to_dict(), "drift_law": self.drift_law.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        return cls(GapLaw.from_dict(d["gap_law"]), DriftLaw.from_dict(d["drift_law"]))

    @classmethod
    def from_json(cls, s: str) -> "EnvironmentSpec":
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# regime checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    """Summary of the transience/moment regime of a spec."""

    e_log_rho: float
    e_log_xi: float
    transient_right: bool
    kesten_alpha: float | None
    speed: float
    gamma_star: float | None
    gamma_grid_checked: int
    e_rho_2gamma: float | None
    e_xi_gamma_rho_3gamma: float | None
    moment_condition_holds: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def kesten_alpha(drift_law: DriftLaw, tol: float = 1e-12) -> float | None:
    """Positive root alpha of E[rho^alpha] = 1, or None when no root exists.

    ``f(a) = E[rho^a]`` is convex with ``f(0) = 1``; a positive root exists
    exactly when ``E log rho < 0`` and some atom has rho > 1.
    """
    rhos = drift_law.rhos
    if np.all(np.abs(rhos - 1.0) < 1e-15):
        raise ValueError("degenerate drift law: rho == 1 almost surely")
    if drift_law.e_log_rho() >= 0.0 or np.max(rhos) <= 1.0:
        return None
    hi = 1.0
    while drift_law.e_rho(hi) < 1.0:
        hi *= 2.0
        if hi > 1e6:  # pragma: no cover - unreachable for valid atom laws
            return None
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if drift_law.e_rho(mid) >= 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def speed_from_moments(e_rho: float, e_xi: float, e_xi2: float, e_rho_xi: float) -> float:
    """Law-of-large-numbers speed from the four moments; 0 in the slow regime."""
    if e_rho >= 1.0 or not np.isfinite(e_xi2) or not np.isfinite(e_rho_xi):
        return 0.0
    num = (1.0 - e_rho) * e_xi
    den = (1.0 - e_rho) * e_xi2 + 2.0 * e_rho_xi * e_xi
    return num / den


def speed_v(spec: EnvironmentSpec) -> float:
    """Asymptotic speed X_t / t; positive only when beta > 2 and E[rho] < 1."""
    e_xi = spec.gap_law.moment(1.0)
    e_xi2 = spec.gap_law.moment(2.0)
    e_rho = spec.drift_law.e_rho(1.0)
    # gaps and drifts are independent, so E[rho xi] factorizes
    e_rho_xi = e_rho * e_xi if np.isfinite(e_xi) else math.inf
    return speed_from_moments(e_rho, e_xi, e_xi2, e_rho_xi)


def validate_regime(spec: EnvironmentSpec, gamma_grid: int = 64) -> RegimeReport:
    """Check transience to the right and the working moment condition.

    The moment condition asks for some gamma in (beta/4, min(1, beta)) with
    E[rho^(2 gamma)] < 1 and E[xi^gamma rho^(3 gamma)] < infinity.  Under
    independence the expectation factorizes and E[xi^gamma] is finite for
    every gamma < beta, so the grid search only has to find a gamma with
    E[rho^(2 gamma)] < 1.
    """
    gap, drift = spec.gap_law, spec.drift_law
    e_log_rho = drift.e_log_rho()
    e_log_xi = gap.log_moment()
    transient = e_log_rho < 0.0
    alpha = kesten_alpha(drift) if transient else None

    beta = gap.beta
    lo, hi = beta / 4.0, min(1.0, beta)
    gamma_star = None
    e_rho_2g = None
    e_cross = None
    grid = np.linspace(lo, hi, gamma_grid + 2)[1:-1]
    for g in grid:
        if drift.e_rho(2.0 * g) < 1.0:
            gamma_star = float(g)
            e_rho_2g = drift.e_rho(2.0 * g)
            e_cross = gap.moment(float(g)) * drift.e_rho(3.0 * g)
            break
    holds = gamma_star is not None and np.isfinite(e_cross)

    return RegimeReport(
        e_log_rho=e_log_rho,
        e_log_xi=e_log_xi,
        transient_right=transient,
        kesten_alpha=alpha,
        speed=speed_v(spec),
        gamma_star=gamma_star,
        gamma_grid_checked=len(grid),
        e_rho_2gamma=e_rho_2g,
        e_xi_gamma_rho_3gamma=e_cross,
        moment_condition_holds=bool(holds),
    )


# ---------------------------------------------------------------------------
# scaling sequences
# ---------------------------------------------------------------------------


class ScalingSequences:
    """The four deterministic scaling sequences attached to a gap law.

    a_n solves n * P[V > a] = 1 (continuous tail), m_n = n * E[xi; xi <= a_n],
    c_n is the asymptotic inverse of m, and d_n = 1 / P[xi > n].
    """

    def __init__(self, gap_law: GapLaw):
        self.gap_law = gap_law

    def a(self, n) -> float | np.ndarray:
        """Real solution of n * P[V > a] = 1; equals scale * n^(1/beta)."""
        n = np.asarray(n, dtype=float)
        out = self.gap_law.scale * n ** (1.0 / self.gap_law.beta)
        return out if out.ndim else float(out)

    def m(self, n: float) -> float:
        """n * E[xi ; xi <= a_n], extended to real n."""
        return float(n) * self.gap_law.truncated_mean(self.a(float(n)))

    def c(self, n: float, rtol: float = 1e-9) -> float:
        """Asymptotic inverse of m: real x with m(x) = n, by monotone bisection."""
        if n <= 0:
            raise ValueError("c_n is defined for n > 0")
        lo, hi = 0.0, 2.0
        while self.m(hi) < n:
            lo, hi = hi, 2.0 * hi
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if self.m(mid) >= n:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def d(self, n: int) -> float:
        """1 / P[xi > n]; grows like n^beta."""
        t = self.gap_law.tail(int(n))
        return 1.0 / t


# ---------------------------------------------------------------------------
# sampled environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Environment:
    """One sampled environment on index window ``k_min .. n_right``.

    Arrays are aligned so that index ``k`` lives at slot ``k - k_min``.
    ``S[k] - S[k-1] = xi[k]`` and ``S_0 = 0``.  The window extends far enough
    to the left that the product of rho across the extension is below the
    truncation tolerance used for the two-sided potential W.
    """

    spec: EnvironmentSpec
    k_min: int
    n_right: int
    xi: np.ndarray  # int64, gaps xi_k for k in [k_min, n_right]
    lam: np.ndarray  # float64, drifts lambda_k
    S: np.ndarray  # int64, site positions S_k
    w_tol: float
    seed_meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for arr in (self.xi, self.lam, self.S):
            arr.flags.writeable = False

    def _slot(self, k: int) -> int:
        if not (self.k_min <= k <= self.n_right):
            raise IndexError(f"index {k} outside environment window [{self.k_min}, {self.n_right}]")
        return k - self.k_min

    def xi_at(self, k: int) -> int:
        return int(self.xi[self._slot(k)])

    def lam_at(self, k: int) -> float:
        return float(self.lam[self._slot(k)])

    def rho_at(self, k: int) -> float:
        lam = self.lam_at(k)
        return (1.0 - lam) / lam

    def site(self, k: int) -> int:
        return int(self.S[self._slot(k)])

    @property
    def rho(self) -> np.ndarray:
        return (1.0 - self.lam) / self.lam

    @property
    def left_extent(self) -> int:
        return -self.k_min

    def nu(self, n: int) -> int:
        """First index k with S_k > n (the marked site strictly beyond n)."""
        slot = int(np.searchsorted(self.S, n, side="right"))
        k = slot + self.k_min
        if k > self.n_right:
            raise ValueError(f"environment too short: S_{self.n_right} = {self.site(self.n_right)} <= {n}")
        return k

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        ks = np.arange(self.k_min, self.n_right + 1)
        return {
            "seed_meta": self.seed_meta,
            "spec": self.spec.to_dict(),
            "w_tol": self.w_tol,
            "k": ks.tolist(),
            "S": self.S.tolist(),
            "xi": self.xi.tolist(),
            "lambda": self.lam.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, d: dict) -> "Environment":
        ks = np.asarray(d["k"], dtype=np.int64)
        return cls(
            spec=EnvironmentSpec.from_dict(d["spec"]),
            k_min=int(ks[0]),
            n_right=int(ks[-1]),
            xi=np.asarray(d["xi"], dtype=np.int64),
            lam=np.asarray(d["lambda"], dtype=np.float64),
            S=np.asarray(d["S"], dtype=np.int64),
            w_tol=float(d.get("w_tol", 1e-10)),
            seed_meta=dict(d.get("seed_meta", {})),
        )

    @classmethod
    def load(cls, path) -> "Environment":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def from_arrays(cls, spec, k_min, xi, lam, w_tol=1e-10, seed_meta=None) -> "Environment":
        """Build an environment from explicit gap/drift arrays (tests, fixtures)."""
        xi = np.asarray(xi, dtype=np.int64).copy()
        lam = np.asarray(lam, dtype=np.float64).copy()
        if xi.shape != lam.shape:
            raise ValueError("xi and lambda must have the same length")
        n_right = k_min + len(xi) - 1
        csum = np.cumsum(xi)
        # anchor S_0 = 0: S_k = csum[k - k_min] - csum[-k_min]
        anchor = csum[-k_min] if k_min <= 0 <= n_right else 0
        S = csum - anchor
        return cls(spec=spec, k_min=k_min, n_right=n_right, xi=xi, lam=lam,
                   S=S.astype(np.int64), w_tol=float(w_tol), seed_meta=seed_meta or {})


def sample_environment(
    spec: EnvironmentSpec,
    n_right: int,
    master_seed: int,
    stream: tuple = ("env", 0),
    w_tol: float = 1e-10,
    left_cap: int = 2_000_000,
) -> Environment:
    """Sample an environment with ``n_right`` marked sites to the right of 0.

    The window [k_min, 0] on the left is extended lazily until the running
    product of rho over the extension falls below ``w_tol``, which certifies
    the truncation error of the two-sided potential W.  Requires a regime
    transient to the right (E log rho < 0); other regimes are rejected.
    """
    if spec.drift_law.e_log_rho() >= 0.0:
        raise ValueError("environment law is not transient to the right (E log rho >= 0)")
    rng = substream(master_seed, *stream)

    # right block first (k = 0 .. n_right), then lazy left blocks
    xi_right = spec.gap_law.sample(rng, n_right + 1)
    lam_right = spec.drift_law.sample(rng, n_right + 1)

    xi_left_blocks, lam_left_blocks = [], []
    log_prod = math.log((1.0 - lam_right[0]) / lam_right[0])  # rho_0
    log_tol = math.log(w_tol)
    n_left = 0
    block = 64
    while log_prod >= log_tol:
        if n_left >= left_cap:
            raise RuntimeError(f"left extension exceeded cap of {left_cap} sites")
        xb = spec.gap_law.sample(rng, block)
        lb = spec.drift_law.sample(rng, block)
        xi_left_blocks.append(xb)
        lam_left_blocks.append(lb)
        # blocks extend downward: lb[j] is drift at k = -(n_left + j + 1)
        log_prod += float(np.sum(np.log((1.0 - lb) / lb)))
        n_left += block
        block = min(2 * block, 8192)

    if xi_left_blocks:
        xi_left = np.concatenate(xi_left_blocks)[::-1]
        lam_left = np.concatenate(lam_left_blocks)[::-1]
        xi = np.concatenate([xi_left, xi_right])
        lam = np.concatenate([lam_left, lam_right])
    else:  # pragma: no cover - w_tol >= rho_0 only in contrived configs
        xi, lam = xi_right, lam_right

    k_min = -n_left
    seed_meta = {
        "master_seed": int(master_seed),
        "stream": list(stream),
        "scheme": SCHEME_ID,
    }
    return Environment.from_arrays(spec, k_min, xi, lam, w_tol=w_tol, seed_meta=seed_meta)
