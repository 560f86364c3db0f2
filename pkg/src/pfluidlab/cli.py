"""Command-line front end.

Subcommands:
    run          single (h, k) simulation, per-step CSV plus final state dump
    convergence  refinement sweep with the coupled step schedule, EOC table
    props        seeded sampling batches of the constitutive invariants
    gronwall     verify a sequence bundle against the discrete inequality

Exit codes: 0 success, 1 configuration/validation error, 2 solver failure,
3 property violation.  Configuration comes from an optional JSON file with
per-flag overrides; identical configuration and seed reproduce byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated experiment description (see `validate`)."""

    p: float = 2.0
    delta: float = 0.0
    mu: float = 1.0
    dim: int = 2
    nmesh: list = field(default_factory=lambda: [8, 16, 32])
    c3: float = 1.0
    T: float = 0.5
    delta0: float = 1.0
    solution: str = "taylor-green-2d"
    seed: int = 0
    out: str = "out"

    @classmethod
    def load(cls, path, overrides):
        data = {}
        if path is not None:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = set(cls().__dict__)
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            cfg = cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.normalize()
        return cfg

    def normalize(self):
        self.p = float(self.p)
        self.delta = float(self.delta)
        self.mu = float(self.mu)
        self.dim = int(self.dim)
        self.nmesh = [int(n) for n in self.nmesh]
        self.c3 = float(self.c3)
        self.T = float(self.T)
        self.delta0 = float(self.delta0)
        self.seed = int(self.seed)

    def validate(self, convergence=False):
        if self.dim not in (2, 3):
            raise ConfigError(f"field 'dim': must be 2 or 3, got {self.dim}")
        if not self.p > 1.0:
            raise ConfigError(f"field 'p': must exceed 1, got {self.p}")
        if convergence and not (1.5 < self.p <= 2.0):
            raise ConfigError(
                f"field 'p': convergence experiments need p in (3/2, 2], got {self.p}"
            )
        if not (0.0 <= self.delta <= self.delta0):
            raise ConfigError(
                f"field 'delta': must lie in [0, delta0={self.delta0}], got {self.delta}"
            )
        if self.mu <= 0.0:
            raise ConfigError(f"field 'mu': must be positive, got {self.mu}")
        if self.T <= 0.0:
            raise ConfigError(f"field 'T': must be positive, got {self.T}")
        if self.c3 <= 0.0:
            raise ConfigError(f"field 'c3': must be positive, got {self.c3}")
        if not self.nmesh or any(n < 2 for n in self.nmesh):
            raise ConfigError(f"field 'nmesh': needs sizes >= 2, got {self.nmesh}")
        if convergence and len(self.nmesh) < 3:
            raise ConfigError(
                f"field 'nmesh': convergence needs >= 3 sizes, got {self.nmesh}"
            )
        if self.solution not in ("taylor-green-2d", "beltrami-3d", "zero"):
            raise ConfigError(f"field 'solution': unknown id {self.solution!r}")
        sol_dim = {"taylor-green-2d": 2, "beltrami-3d": 3}.get(self.solution)
        if sol_dim is not None and sol_dim != self.dim:
            raise ConfigError(
                f"field 'solution': {self.solution} is {sol_dim}D but dim={self.dim}"
            )

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)


def _add_common_flags(sub):
    sub.add_argument("--config", default=None, help="JSON config file")
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--delta", type=float, default=None)
    sub.add_argument("--mu", type=float, default=None)
    sub.add_argument("--dim", type=int, default=None)
    sub.add_argument("--nmesh", type=int, nargs="+", default=None)
    sub.add_argument("--c3", type=float, default=None)
    sub.add_argument("--T", type=float, default=None, dest="T")
    sub.add_argument("--delta0", type=float, default=None)
    sub.add_argument("--solution", default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None)


def _config_from_args(args, convergence=False):
    overrides = {
        k: getattr(args, k, None)
        for k in (
            "p", "delta", "mu", "dim", "nmesh", "c3", "T", "delta0",
            "solution", "seed", "out",
        )
    }
    cfg = ExperimentConfig.load(args.config, overrides)
    cfg.validate(convergence=convergence)
    return cfg


def cmd_run(args) -> int:
    from .constitutive import PDeltaParams
    from .errors import (
        coupling_schedule,
        forcing_from_solution,
        solution_by_name,
        steps_for_horizon,
    )
    from .mesh import build_structured
    from .solver import RunConfig, StepFailure, run
    from .spaces import TaylorHoodSpace

    cfg = _config_from_args(args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg.dump(outdir / "config.json")

    params = PDeltaParams(p=cfg.p, delta=cfg.delta, mu=cfg.mu)
    sol = solution_by_name(cfg.solution, cfg.dim)
    forcing = forcing_from_solution(params, sol)
    n = cfg.nmesh[0]
    mesh = build_structured(cfg.dim, n)
    space = TaylorHoodSpace(mesh)
    if 1.5 < cfg.p <= 2.0:
        M, k = steps_for_horizon(cfg.T, coupling_schedule(cfg.p, mesh.h, cfg.c3))
    else:
        M, k = steps_for_horizon(cfg.T, cfg.T / 8.0)
    run_cfg = RunConfig(
        params=params,
        space=space,
        dt=k,
        n_steps=M,
        forcing=forcing,
        initial=sol.velocity_field(0.0),
        csv_path=str(outdir / f"steps_n{n}.csv"),
    )
    try:
        states, reports, energy = run(run_cfg)
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    final = states[-1]
    np.savez(
        outdir / f"state_n{n}.npz",
        u=final.u.coeffs,
        pressure=final.pressure.coeffs,
        t=final.t,
        m=final.m,
    )
    if not all(np.isfinite(v) for v in energy.kinetic):
        print("non-finite energies", file=sys.stderr)
        return EXIT_SOLVER
    print(f"run complete: {M} steps, k={k:.6g}, final kinetic={energy.kinetic[-1]:.6g}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    from .errors import convergence_study, gronwall_diagnostics, save_bundle
    from .solver import StepFailure

    cfg = _config_from_args(args, convergence=True)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg.dump(outdir / "config.json")
    tag = f"p{cfg.p}_delta{cfg.delta}"
    try:
        table, runs = convergence_study(
            cfg.p,
            cfg.delta,
            sizes=cfg.nmesh,
            c3=cfg.c3,
            T=cfg.T,
            mu=cfg.mu,
            dim=cfg.dim,
            solution=cfg.solution,
            csv_path=str(outdir / f"convergence_{tag}.csv"),
            keep_runs=args.emit_gronwall,
        )
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    if args.emit_gronwall:
        from .constitutive import PDeltaParams
        from .errors import solution_by_name

        params = PDeltaParams(p=cfg.p, delta=cfg.delta, mu=cfg.mu)
        sol = solution_by_name(cfg.solution, cfg.dim)
        for r in runs:
            data = gronwall_diagnostics(
                r["space"], r["states"], sol, params, r["k"], r["h"]
            )
            save_bundle(data, outdir / f"gronwall_{tag}_h{r['h']:.6g}.json")
    print(f"EOC (total): {['%.3f' % v for v in table.eoc_total]}")
    return EXIT_OK


def cmd_props(args) -> int:
    from .props import run_property_batches

    if args.count < 1:
        print("count must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    report = run_property_batches(seed=args.seed, count=args.count)
    out = Path(args.out or "props_report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    for name, res in sorted(report["checks"].items()):
        print(f"{name}: {'pass' if res['ok'] else 'FAIL'} (worst {res['worst']:.6g})")
    if not report["all_ok"]:
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_gronwall(args) -> int:
    from .gronwall import GronwallData, verify_conclusion

    try:
        with open(args.bundle) as fh:
            raw = json.load(fh)
        data = GronwallData.from_dict(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot parse bundle {args.bundle}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, ValueError) as exc:
        print(f"malformed bundle {args.bundle}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    verdict = verify_conclusion(data)
    out = Path(args.out or "gronwall_verdict.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(verdict.to_dict(), fh, indent=1, sort_keys=True)
    print(f"status: {verdict.to_dict()['status']}")
    if not verdict.hypotheses_ok or not verdict.recursions_ok:
        return EXIT_PROPERTY
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pfluid-lab",
        description="power-law flow experiments: runs, convergence sweeps, "
        "property batches, discrete-inequality verification",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub_run = subs.add_parser("run", help="single simulation")
    _add_common_flags(sub_run)

    sub_conv = subs.add_parser("convergence", help="refinement sweep with EOC")
    _add_common_flags(sub_conv)
    sub_conv.add_argument(
        "--emit-gronwall", action="store_true", help="write sequence bundles"
    )

    sub_props = subs.add_parser("props", help="constitutive property batches")
    sub_props.add_argument("--seed", type=int, default=0)
    sub_props.add_argument("--count", type=int, default=10000)
    sub_props.add_argument("--out", default=None)

    sub_gr = subs.add_parser("gronwall", help="verify a sequence bundle")
    sub_gr.add_argument("bundle", help="JSON bundle path")
    sub_gr.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "convergence":
            return cmd_convergence(args)
        if args.command == "props":
            return cmd_props(args)
        if args.command == "gronwall":
            return cmd_gronwall(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
