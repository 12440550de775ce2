"""Evidence-of-non-convergence probe for the quenched passage law.

In a single frozen heavy-tailed environment the centered passage time,
normalized by its quenched standard deviation, does not settle into one
limiting shape: the profile of dominant gap weights keeps changing along any
fixed environment.  The probe tracks the KS distance between normalized
empirical measures at consecutive points of a geometric target schedule:

* heavy-tailed gaps: the distance sequence must stay bounded away from zero;
* a light-tailed control (gaps capped at a small constant) must show the
  distances decaying, since a quenched CLT applies there;
* at "exceptional" indices, where one gap's fourth power dominates the
  accumulated variance, the local normalized law must be close to 2 theta - 1.

This is explicitly labeled evidence of non-convergence at desk scale, not a
proof artifact.  Thresholds are pilot-calibrated and frozen in the config.
"""

from __future__ import annotations

import time

import numpy as np

from . import stats
from .limits import ThetaSampler
from .rng import substream
from .verify import ExperimentConfig, VerificationReport
from .walk import reduced_passage_values

DEFAULT_SCHEDULE_BASE = 390
DEFAULT_SCHEDULE_FACTOR = 4
DEFAULT_FLOOR = 0.05
DEFAULT_SEED_FRACTION = 0.8
DEFAULT_EXC_DOMINANCE = 100.0


def geometric_schedule(base: int, factor: int, n_max: int) -> list:
    out = []
    n = base
    while n <= n_max:
        out.append(n)
        n *= factor
    return out


def _normalized_measure(xi, n, replicas, rng, ts, compress_rel):
    """Centered passage draws divided by the exact quenched sd."""
    csum = np.cumsum(xi)
    stop = int(np.searchsorted(csum, n, side="right"))
    head = xi[: stop + 1]
    s_last = float(head[:-1].sum())
    w2 = head[:-1].astype(float) ** 2
    tail = n - s_last
    var = (2.0 / 3.0) * (np.sum(w2**2) + tail**4)
    vals = reduced_passage_values(head, n, replicas, rng, ts, compress_rel=compress_rel)
    return vals / np.sqrt(var)


def distance_sequence(xi, schedule, replicas, rng, ts, compress_rel):
    """KS between normalized measures at consecutive schedule points."""
    measures = [
        _normalized_measure(xi, n, replicas, rng, ts, compress_rel) for n in schedule
    ]
    return [stats.ks_distance(measures[i], measures[i + 1]) for i in range(len(measures) - 1)]


def detect_exceptional_indices(xi, dominance: float) -> list:
    """Indices k (0-based into xi) where xi_k^4 dominates the accumulated
    fourth-moment mass sum_{j<k} xi_j^4 by the given factor."""
    x4 = xi.astype(float) ** 4
    prev = np.concatenate([[0.0], np.cumsum(x4)[:-1]])
    hits = np.flatnonzero((x4 >= dominance * prev) & (prev > 0))
    return [int(k) for k in hits]


def local_law_distance(xi, k, replicas, rng, ts) -> float:
    """KS between the normalized law at exceptional index k and 2 theta - 1.

    Normalizes sum_{j <= k} xi_j^2 (2 theta_j - 1) by xi_k^2; when xi_k^4
    dominates, this should look like a single 2 theta - 1 draw.
    """
    w = xi[: k + 1].astype(float) ** 2
    # exact thetas for the dominant weights, Gaussian for the rest
    order = np.argsort(w)
    small, big = order[:-64], order[-64:]
    theta = ts.sample(rng, (replicas, len(big)))
    vals = (2.0 * theta - 1.0) @ w[big]
    small_var = (2.0 / 3.0) * float(np.sum(w[small] ** 2))
    if small_var > 0:
        vals += rng.normal(0.0, np.sqrt(small_var), size=replicas)
    vals /= w[-1]
    ref = 2.0 * ts.sample(rng, replicas) - 1.0
    return stats.ks_distance(vals, ref)


def strong_limit_probe(cfg: ExperimentConfig) -> VerificationReport:
    t0 = time.time()
    gap = cfg.spec.gap_law
    ex = cfg.extras
    n_sites = int(ex.get("n_sites", 100_000))
    n_seeds = int(ex.get("n_seeds", 20))
    replicas = int(ex.get("replicas", cfg.inner_replicas))
    floor = float(ex.get("floor", DEFAULT_FLOOR))
    seed_fraction = float(ex.get("seed_fraction", DEFAULT_SEED_FRACTION))
    dominance = float(ex.get("exceptional_dominance", DEFAULT_EXC_DOMINANCE))
    cap = int(ex.get("control_cap", 10))
    compress_rel = cfg.compress_rel if cfg.compress_rel is not None else 1e-6
    ts = ThetaSampler()

    heavy_seq = []
    heavy_hits = 0
    window_hits = 0
    local_ks = []
    for i in range(n_seeds):
        rng = substream(cfg.master_seed, "probe", i)
        xi = gap.sample(rng, n_sites)
        schedule = geometric_schedule(
            int(ex.get("schedule_base", DEFAULT_SCHEDULE_BASE)),
            int(ex.get("schedule_factor", DEFAULT_SCHEDULE_FACTOR)),
            int(xi.sum()) - 1,
        )
        seq = distance_sequence(xi, schedule, replicas, rng, ts, compress_rel)
        heavy_seq.append(seq)
        # per-seed evidence of non-convergence: the distance sequence has not
        # decayed below the floor (a spike appears whenever a newly dominant
        # gap enters, which is a probabilistic event per schedule step)
        if max(seq) >= floor:
            heavy_hits += 1
        if max(seq[-3:]) >= floor:
            window_hits += 1
        for k in detect_exceptional_indices(xi, dominance)[-2:]:
            local_ks.append(local_law_distance(xi, k, replicas, rng, ts))

    # light-tailed control: capped gaps, exact thetas (no compression), one seed
    rng = substream(cfg.master_seed, "probe-control")
    xi_c = np.minimum(gap.sample(rng, n_sites), cap)
    schedule_c = geometric_schedule(
        int(ex.get("schedule_base", DEFAULT_SCHEDULE_BASE)),
        int(ex.get("schedule_factor", DEFAULT_SCHEDULE_FACTOR)),
        min(int(xi_c.sum()) - 1, 110_000),
    )
    control_seq = distance_sequence(xi_c, schedule_c, replicas, rng, ts, None)

    frac = heavy_hits / n_seeds
    tests = [
        {"functional": "non-convergence persistence",
         "statistic": "max distance over schedule >= floor",
         "fraction": frac, "fraction_last3_window": window_hits / n_seeds,
         "threshold": seed_fraction,
         "pass": bool(frac >= seed_fraction)},
        {"functional": "light-tailed control decays",
         "final_distance": control_seq[-1], "floor": floor,
         "pass": bool(control_seq[-1] < floor)},
        {"functional": "exceptional local law vs 2*theta-1",
         "n_detected": len(local_ks),
         "worst_ks": max(local_ks) if local_ks else None,
         "pass": bool(local_ks) and max(local_ks) <= 0.05},
    ]
    ok = all(t["pass"] for t in tests)
    return VerificationReport(
        theorem="probe", passed=bool(ok), tests=tests, controls=[],
        certificates={"compress_rel": compress_rel},
        samples={"heavy_sequences": heavy_seq, "control_sequence": control_seq,
                 "local_ks": local_ks},
        config=cfg.to_dict(), runtime_s=time.time() - t0)
