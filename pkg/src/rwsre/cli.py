"""Command-line front end: configuration, seed management, persistence.

Subcommands: env, moments, simulate, limits, verify, probe, report.
Exit codes: 0 success, 1 validation error, 2 the run completed but a
statistical pass flag failed.

Every subcommand that writes data also writes a ``manifest.json`` with the
config snapshot, master seed, seed-scheme identifier, package version,
wall-clock and sha256 digests of the output files.  Data files themselves
contain no timestamps, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .environment import Environment, EnvironmentSpec, sample_environment, validate_regime
from .limits import (
    ThetaSampler,
    sample_F,
    sample_G,
    sample_poisson_pp,
    sample_subordinator,
    extend_past_level,
)
from .quenched import compute_potentials, cumulative_moments
from .rng import SCHEME_ID, substream
from .verify import ExperimentConfig, run_experiment
from .walk import block_passage, direct_passage, reduced_passage

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STATISTICAL = 2


class ConfigError(Exception):
    pass


def _load_config(path: str) -> dict:
    if not path or not os.path.exists(path):
        raise ConfigError(f"config file not found: {path!r}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("config must be a non-empty JSON object")
    return cfg


def _require(cfg: dict, *fields):
    missing = [f for f in fields if f not in cfg]
    if missing:
        raise ConfigError("config missing required field(s): " + ", ".join(missing))


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: str, config: dict, master_seed, t0: float, outputs: list) -> None:
    manifest = {
        "config": config,
        "master_seed": master_seed,
        "seed_scheme": SCHEME_ID,
        "version": __version__,
        "wallclock_s": time.time() - t0,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _spec_from_config(cfg: dict) -> EnvironmentSpec:
    _require(cfg, "spec")
    try:
        return EnvironmentSpec.from_dict(cfg["spec"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad environment spec: {e}") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_env(args) -> int:
    cfg = _load_config(args.config)
    spec = _spec_from_config(cfg)
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 1)
    n_right = int(cfg.get("n_right", 1000))
    t0 = time.time()
    regime = validate_regime(spec)
    if not regime.transient_right:
        print("regime mismatch: E log rho >= 0, not transient to the right", file=sys.stderr)
        return EXIT_CONFIG
    if not regime.moment_condition_holds:
        print("regime mismatch: E rho^{2 gamma} < 1 not satisfiable for any "
              "gamma in (beta/4, min(1, beta))", file=sys.stderr)
        return EXIT_CONFIG
    env = sample_environment(spec, n_right, seed, stream=tuple(cfg.get("stream", ("env", 0))))
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "environment.json")
    env.save(out)
    _write_manifest(args.out, cfg, seed, t0, [out])
    print(f"environment with {n_right} marked sites -> {out}")
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = _load_config(args.config)
    _require(cfg, "environment")
    t0 = time.time()
    env = Environment.load(cfg["environment"])
    n = int(cfg.get("n_crossings", env.n_right))
    pot = compute_potentials(env)
    qm = cumulative_moments(pot, n)
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "moments.csv")
    header = ("k,xi,lambda,W_prev,mean_left,mean_right,var_left,var_right,"
              "cum_mean,cum_var_left,cum_var_right,trunc_err")
    with open(out, "w") as fh:
        fh.write(header + "\n")
        for i in range(n):
            fh.write(",".join([
                str(int(qm.k[i])), str(int(qm.xi[i])), repr(float(qm.lam[i])),
                repr(float(qm.W_prev[i])), repr(float(qm.mean_left[i])),
                repr(float(qm.mean_right[i])), repr(float(qm.var_left[i])),
                repr(float(qm.var_right[i])), repr(float(qm.cum_mean[i])),
                repr(float(qm.cum_var_left[i])), repr(float(qm.cum_var_right[i])),
                repr(float(qm.trunc_err)),
            ]) + "\n")
    _write_manifest(args.out, cfg, cfg.get("master_seed"), t0, [out])
    print(f"{n} crossings -> {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _require(cfg, "environment", "n", "replicas")
    t0 = time.time()
    env = Environment.load(cfg["environment"])
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 1)
    tier = args.tier or cfg.get("tier", "direct")
    n = int(cfg["n"])
    replicas = int(cfg["replicas"])
    stream = tuple(cfg.get("stream", ("simulate", 0)))
    rng = substream(seed, *stream)
    if tier == "direct":
        rec = direct_passage(env, n, replicas, rng)
    elif tier == "block":
        rec = block_passage(env, n, replicas, rng)
    elif tier == "reduced":
        rec = reduced_passage(env, n, replicas, rng, ThetaSampler())
    else:
        print(f"unknown tier {tier!r}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "passage.jsonl")
    with open(out, "w") as fh:
        for v in rec.samples:
            fh.write(json.dumps({
                "n": rec.n, "T": float(v), "nu": rec.nu, "S_last": rec.s_last,
                "tier": rec.tier, "centered": rec.centered, "stream": list(stream),
            }) + "\n")
    _write_manifest(args.out, cfg, seed, t0, [out])
    print(f"{replicas} samples ({tier} tier) -> {out}")
    return EXIT_OK


def cmd_limits(args) -> int:
    cfg = _load_config(args.config)
    _require(cfg, "object", "count")
    t0 = time.time()
    obj = cfg["object"]
    count = int(cfg["count"])
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 1)
    rng = substream(seed, "limits", obj)
    cutoff = float(cfg.get("cutoff", 1e-4))
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, f"{obj}.jsonl")
    ts = ThetaSampler()
    with open(out, "w") as fh:
        if obj == "theta":
            for v in ts.sample(rng, count):
                fh.write(json.dumps({"theta": float(v)}) + "\n")
        elif obj == "pp":
            _require(cfg, "c", "q")
            for _ in range(count):
                pm = sample_poisson_pp(float(cfg["c"]), float(cfg["q"]), cutoff, rng)
                fh.write(json.dumps({"x": pm.x.tolist(), "bias_x2": pm.bias_x2}) + "\n")
        elif obj == "subordinator":
            _require(cfg, "beta")
            horizon = float(cfg.get("horizon", 1.0))
            for _ in range(count):
                p = sample_subordinator(float(cfg["beta"]), horizon, cutoff, rng)
                fh.write(json.dumps({"times": p.times.tolist(), "sizes": p.sizes.tolist(),
                                     "drift": p.drift, "final": p.final}) + "\n")
        elif obj == "G":
            _require(cfg, "c", "q")
            for _ in range(count):
                pm = sample_poisson_pp(float(cfg["c"]), float(cfg["q"]), cutoff, rng)
                v = sample_G(pm, rng, 1, ts)[0]
                fh.write(json.dumps({"G": float(v)}) + "\n")
        elif obj == "F":
            _require(cfg, "beta")
            for _ in range(count):
                p = sample_subordinator(float(cfg["beta"]), 2.0, cutoff, rng)
                p = extend_past_level(p, 1.0, rng)
                v = sample_F(p, rng, 1, ts)[0]
                fh.write(json.dumps({"F": float(v)}) + "\n")
        else:
            print(f"unknown limit object {obj!r} "
                  "(expected theta|pp|subordinator|G|F)", file=sys.stderr)
            return EXIT_CONFIG
    _write_manifest(args.out, cfg, seed, t0, [out])
    print(f"{count} draws of {obj} -> {out}")
    return EXIT_OK


def _run_verify(args) -> int:
    cfg_dict = _load_config(args.config)
    try:
        exp = ExperimentConfig.from_dict(cfg_dict)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad experiment config: {e}") from None
    if args.seed is not None:
        exp.master_seed = args.seed
    if args.workers is not None:
        exp.workers = args.workers
    if args.tier:
        exp.tier = args.tier
    t0 = time.time()
    try:
        report = run_experiment(exp)
    except ValueError as e:
        print(f"regime mismatch: {e}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "report.json")
    # wall-clock lives in the manifest; the data file stays byte-reproducible
    data = report.to_dict()
    data.pop("runtime_s")
    with open(out, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
    _write_manifest(args.out, cfg_dict, exp.master_seed, t0, [out])
    flag = "PASS" if report.passed else "FAIL"
    print(f"{report.theorem}: {flag} -> {out}")
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def cmd_verify(args) -> int:
    return _run_verify(args)


def cmd_probe(args) -> int:
    return _run_verify(args)


def cmd_report(args) -> int:
    from . import report as report_mod

    run_dir = args.run_dir
    if not os.path.isdir(run_dir):
        print(f"run directory not found: {run_dir!r}", file=sys.stderr)
        return EXIT_CONFIG
    if not os.path.exists(os.path.join(run_dir, "report.json")):
        print(f"no report.json in {run_dir!r}", file=sys.stderr)
        return EXIT_CONFIG
    made = report_mod.render_run(run_dir)
    for p in made:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rwsre",
        description="Simulation and verification laboratory for random walks "
                    "in sparse random environments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="JSON config file")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--tier", default=None, choices=["direct", "block", "reduced"])

    for name, fn in [("env", cmd_env), ("moments", cmd_moments),
                     ("simulate", cmd_simulate), ("limits", cmd_limits),
                     ("verify", cmd_verify), ("probe", cmd_probe)]:
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("report")
    p.add_argument("run_dir", help="directory holding report.json")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
