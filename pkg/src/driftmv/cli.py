"""Command-line interface.

Configuration merges three layers with increasing precedence: built-in
defaults, an INI config file, explicit flags. Bad values raise; nothing is
clamped or coerced silently. Reruns with the same resolved configuration
write byte-identical artifacts.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass

from . import __version__
from .backend import BACKEND
from .experiments import (run_compare, run_converge, run_example,
                          run_simulate, run_validate)
from .model import ModelParams
from .paths import EnsembleSpec, GridSpec

EXPERIMENTS = ("simulate", "example", "converge", "compare", "validate")

DEFAULTS = {
    "experiment": "simulate",
    "a": 0.8, "b": 0.2, "r": 0.05, "pi0": 0.5, "y0": 1.0, "z": 1.1,
    "horizon": 1.0,
    "n": 128, "m": 256, "stride": 8,
    "seed": 12345, "threads": 1, "replications": 32,
    "out": "driftmv_out",
}

_MODEL_KEYS = ("a", "b", "r", "pi0", "y0", "z", "horizon")
_RUN_KEYS = ("experiment", "n", "m", "stride", "seed", "threads",
             "replications", "out")
_INT_KEYS = {"n", "m", "stride", "seed", "threads", "replications"}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one run."""

    experiment: str
    a: float
    b: float
    r: float
    pi0: float
    y0: float
    z: float
    horizon: float
    n: int
    m: int
    stride: int
    seed: int
    threads: int
    replications: int
    out: str

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {', '.join(EXPERIMENTS)}")
        for name in ("n", "m", "stride", "threads", "replications"):
            v = getattr(self, name)
            if v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")

    def params(self) -> ModelParams:
        return ModelParams(a=self.a, b=self.b, r=self.r, pi0=self.pi0,
                           y0=self.y0, z=self.z, T=self.horizon)

    def grid(self) -> GridSpec:
        return GridSpec(n=self.n, T=self.horizon)

    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(m=self.m, master_seed=self.seed,
                            stride=self.stride)


def _coerce(key: str, raw: str):
    if key in _INT_KEYS:
        return int(raw)
    if key in ("experiment", "out"):
        return raw
    return float(raw)


def load_config(path: str) -> dict:
    """Read overrides from an INI file with [model] and [run] sections."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ValueError(f"config file not found: {path}")
    overrides = {}
    for section, keys in (("model", _MODEL_KEYS), ("run", _RUN_KEYS)):
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            if key not in keys:
                raise ValueError(
                    f"unknown option {key!r} in [{section}] of {path}")
            try:
                overrides[key] = _coerce(key, raw)
            except ValueError:
                raise ValueError(
                    f"bad value for {key!r} in [{section}] of {path}: {raw!r}")
    for section in cp.sections():
        if section not in ("model", "run", "meta"):
            raise ValueError(f"unknown section [{section}] in {path}")
    return overrides


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="driftmv",
        description="Particle solver for mean-variance hedging under "
                    "two-point drift uncertainty.")
    p.add_argument("--version", action="version",
                   version=f"driftmv {__version__}")
    p.add_argument("--config", metavar="PATH",
                   help="INI file with [model] and [run] sections")
    p.add_argument("--experiment", choices=EXPERIMENTS,
                   help=f"what to run (default {DEFAULTS['experiment']})")
    p.add_argument("--out", help="output directory for CSV artifacts")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--threads", type=int,
                   help="worker threads for node evaluation in simulate")
    p.add_argument("--replications", type=int,
                   help="replications for converge/validate")
    g = p.add_argument_group("grid and ensemble")
    g.add_argument("--n", type=int, help="time steps on the grid")
    g.add_argument("--m", type=int, help="branch paths per evaluation node")
    g.add_argument("--stride", type=int,
                   help="evaluate every stride-th node (must divide n)")
    mg = p.add_argument_group("model")
    mg.add_argument("--a", type=float, help="high drift state")
    mg.add_argument("--b", type=float, help="low drift state")
    mg.add_argument("--r", type=float, help="risk-free rate")
    mg.add_argument("--pi0", type=float, help="prior probability of state a")
    mg.add_argument("--y0", type=float, help="initial wealth")
    mg.add_argument("--z", type=float, help="target terminal mean wealth")
    mg.add_argument("--horizon", type=float, help="time horizon T")
    return p


def resolve(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(load_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key)
        if v is not None:
            merged[key] = v
    return RunConfig(**merged)


def write_run_meta(cfg: RunConfig, out_dir: str) -> str:
    """Echo the resolved configuration; feeding it back reproduces the run."""
    cp = configparser.ConfigParser()
    cp["model"] = {k: repr(getattr(cfg, k)) for k in _MODEL_KEYS}
    cp["run"] = {k: str(getattr(cfg, k)) for k in _RUN_KEYS}
    cp["meta"] = {"package_version": __version__, "backend": BACKEND}
    path = os.path.join(out_dir, "run_meta.ini")
    with open(path, "w") as fh:
        cp.write(fh)
    return path


def _dispatch(cfg: RunConfig) -> dict:
    if cfg.experiment == "simulate":
        return run_simulate(cfg.params(), cfg.grid(), cfg.ensemble(),
                            cfg.out, threads=cfg.threads)
    if cfg.experiment == "example":
        return run_example(cfg.n, cfg.m, cfg.stride, cfg.seed, cfg.out)
    if cfg.experiment == "compare":
        return run_compare(cfg.n, cfg.m, cfg.stride, cfg.seed, cfg.out)
    if cfg.experiment == "converge":
        return run_converge(cfg.params(), cfg.seed, cfg.out,
                            replications=cfg.replications)
    return run_validate(cfg.params(), cfg.grid(), cfg.ensemble(),
                        cfg.out, replications=cfg.replications)


def _print_summary(experiment: str, summary: dict) -> None:
    def emit(prefix, obj):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, dict):
                emit(f"{prefix}{k}.", v)
            else:
                print(f"{prefix}{k}={v}")
    print(f"experiment={experiment}")
    emit("", summary)


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
    except ValueError as exc:
        print(f"driftmv: {exc}", file=sys.stderr)
        return 2
    try:
        os.makedirs(cfg.out, exist_ok=True)
        summary = _dispatch(cfg)
        write_run_meta(cfg, cfg.out)
    except (ValueError, OSError) as exc:
        print(f"driftmv: {exc}", file=sys.stderr)
        return 1
    _print_summary(cfg.experiment, summary)
    if cfg.experiment == "validate" and not summary.get("ok", False):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
