"""Command line pipeline: generate -> lift -> verify, and ``report`` for all three.

Exit codes: 0 when every check passes, 1 on a lift or verification
failure, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import CertificateError, HardyLiftError, LiftError, SpecError
from .hardy import TOL_INV, ProjectionPath
from .innergen import (InnerPathSpec, blaschke_path_spec, crossing_spec, random_spec,
                       seeded_fixtures, synthesize_path)
from .lift import TOL_LIFT, LiftResult, lift
from .series import DEFAULT_DEGREE, DEFAULT_GRID, TOL_INNER
from .verify import BOUND_SLACK, CHAIN_SLACK, KERNEL_GRID, main_theorem_check

__all__ = ["Tolerances", "RunConfig", "RunManifest", "main", "build_parser", "thread_count"]

THREADS_ENV = "HARDYLIFT_THREADS"

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Invalid command line input; maps to exit code 2."""


@dataclass(frozen=True)
class Tolerances:
    inner: float = TOL_INNER
    inv: float = TOL_INV
    lift: float = TOL_LIFT
    slack_bound: float = BOUND_SLACK
    slack_chain: float = CHAIN_SLACK

    def __post_init__(self):
        for name in ("inner", "inv", "lift", "slack_bound", "slack_chain"):
            if not getattr(self, name) > 0:
                raise SpecError(f"tolerance '{name}' must be positive")


@dataclass
class RunConfig:
    """Parsed configuration file.

    The input is one of ``spec`` (an inner path specification), ``fixture``
    (a named generator, see :func:`_fixture_spec`) or ``path`` (a serialized
    projection path).  Top-level ``D`` and ``tGridCount`` override the values
    of generated specs.
    """

    spec: InnerPathSpec | None = None
    path_file: str | None = None
    D: int = DEFAULT_DEGREE
    J_theta: int = DEFAULT_GRID
    J_kernel: int = KERNEL_GRID
    t_count: int = 33
    radii: tuple = (0.5, 0.9)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    output: str = "out"
    refine: int = 4
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise SpecError("config must be a JSON object")
        try:
            tol = d.get("tolerances", {})
            tolerances = Tolerances(
                inner=float(tol.get("inner", TOL_INNER)), inv=float(tol.get("inv", TOL_INV)),
                lift=float(tol.get("lift", TOL_LIFT)),
                slack_bound=float(tol.get("slackBound", BOUND_SLACK)),
                slack_chain=float(tol.get("slackChain", CHAIN_SLACK)))
            radii = d.get("r", [0.5, 0.9])
            radii = tuple(float(x) for x in (radii if isinstance(radii, list) else [radii]))
            cfg = cls(D=int(d.get("D", DEFAULT_DEGREE)), J_theta=int(d.get("JTheta", DEFAULT_GRID)),
                      J_kernel=int(d.get("JKernel", KERNEL_GRID)),
                      t_count=int(d.get("tGridCount", 33)), radii=radii, tolerances=tolerances,
                      seed=int(d.get("seed", 0)), output=str(d.get("output", "out")),
                      refine=int(d.get("refine", 4)), raw=d)
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"malformed config: {exc}") from exc
        if cfg.t_count < 2:
            raise SpecError("tGridCount must be at least 2")
        if any(not 0 < r < 1 for r in cfg.radii):
            raise SpecError("every r must lie in (0, 1)")
        if cfg.J_kernel < KERNEL_GRID:
            raise SpecError(f"JKernel must be at least {KERNEL_GRID}")
        sources = [k for k in ("spec", "fixture", "path") if k in d]
        if len(sources) != 1:
            raise SpecError("config needs exactly one of 'spec', 'fixture', 'path'")
        if "spec" in d:
            spec = dict(d["spec"])
            if "D" in d:
                spec["D"] = cfg.D
            if "tGridCount" in d:
                spec["tGrid"] = {"count": cfg.t_count}
            cfg.spec = InnerPathSpec.from_dict(spec)
        elif "fixture" in d:
            cfg.spec = _fixture_spec(d["fixture"], cfg)
        else:
            cfg.path_file = str(d["path"])
        return cfg

    def sha256(self) -> str:
        return hashlib.sha256(_canonical(self.raw).encode()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fixture_spec(fx: dict, cfg: RunConfig) -> InnerPathSpec:
    """Named fixtures: ``random``, ``seeded``, ``crossing``, ``blaschke``, ``constant``, ``shift``."""
    if not isinstance(fx, dict) or "kind" not in fx:
        raise SpecError("fixture must be an object with a 'kind'")
    kind = fx["kind"]
    D, T = cfg.D, cfg.t_count
    try:
        if kind == "random":
            return random_spec(cfg.seed, int(fx["n"]), int(fx["m"]), int(fx.get("factors", 1)),
                               D=D, t_count=T, amax=float(fx.get("amax", 0.75)))
        if kind == "seeded":
            k = int(fx["index"])
            specs = seeded_fixtures(count=k + 1, seed=int(fx.get("seed", 20240601)), D=D, t_count=T)
            return specs[k]
        if kind == "crossing":
            return crossing_spec(t_count=T, D=D, spin=float(fx.get("spin", 0.8)))
        if kind == "blaschke":
            zeros = [complex(*z) if isinstance(z, list) else float(z) for z in fx["zeros"]]
            return blaschke_path_spec(zeros, t_count=T, D=D)
        if kind == "constant":
            n, m = int(fx["n"]), int(fx.get("m", fx["n"]))
            embed = fx.get("matrix")
            return InnerPathSpec.from_dict({"n": n, "m": m, "D": D, "tGrid": {"count": T},
                                            **({"embed": {"matrix": embed}} if embed else {})})
        if kind == "shift":
            n = int(fx["n"])
            factors = [{"a": [0.0], "P": {"vector": [1.0 if i == j else 0.0 for i in range(n)]}}
                       for j in range(n)]
            return InnerPathSpec.from_dict({"n": n, "m": n, "D": D, "tGrid": {"count": T},
                                            "factors": factors})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"fixture '{kind}': {exc!r}") from exc
    raise SpecError(f"unknown fixture kind '{kind}'")


@dataclass
class RunManifest:
    """Run record; a ``None`` hash (stage run without ``--config``) adopts the stored one."""

    config_hash: str | None
    versions: dict
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"configHash": self.config_hash, "versions": self.versions,
                "timings": self.timings, "summary": self.summary}

    def write(self, out: Path):
        path = out / "manifest.json"
        old = {}
        if path.exists():
            try:
                old = json.loads(path.read_text())
            except json.JSONDecodeError:
                old = {}
        if self.config_hash is None:
            self.config_hash = old.get("configHash")
        if old.get("configHash") == self.config_hash:
            self.timings = {**old.get("timings", {}), **self.timings}
            self.summary = {**old.get("summary", {}), **self.summary}
        _write_json(path, self.to_dict())


def _versions() -> dict:
    return {"hardylift": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def thread_count(arg: int | None) -> int | None:
    """``--threads`` wins over the environment variable; both optional."""
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return None


# file helpers ------------------------------------------------------------

def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _read_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig(raw={})
    return RunConfig.from_dict(_read_json(path))


def _load_path(file: str) -> ProjectionPath:
    try:
        return ProjectionPath.from_dict(_read_json(file))
    except InputError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"{file}: not a projection path ({exc!r})") from exc


def _load_lift(file: str) -> LiftResult:
    try:
        return LiftResult.from_dict(_read_json(file))
    except InputError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"{file}: not a lift result ({exc!r})") from exc


# stages ------------------------------------------------------------------

def stage_generate(cfg: RunConfig, out: Path, workers=None) -> dict:
    if cfg.spec is None:
        raise InputError("generate needs a 'spec' or 'fixture' in the config")
    path, certs = synthesize_path(cfg.spec, workers)
    _write_json(out / "path.json", path.to_dict())
    _write_json(out / "truth.json", {
        "spec": cfg.spec.to_dict(),
        "inner": [c.series.to_dict() for c in certs],
        "isometryDefects": [c.isometry_defect for c in certs],
    })
    return {"points": len(path), "n": cfg.spec.n, "m": cfg.spec.m,
            "maxIsometryDefect": max(c.isometry_defect for c in certs)}


def stage_lift(cfg: RunConfig, path_file: str, out: Path, workers=None) -> dict:
    path = _load_path(path_file)
    tol = cfg.tolerances
    res = lift(path, tol_inner=tol.inner, tol_lift=tol.lift, workers=workers)
    _write_json(out / "lift.json", res.to_dict())
    (out / "lift_residuals.csv").write_text(res.residuals_csv())
    return {"m": res.m, "intervals": len(res.cover),
            "maxRoundtrip": max(res.diagnostics["roundtrip"]),
            "maxInnerDefect": max(res.diagnostics["inner_defect"])}


def stage_verify(cfg: RunConfig, lift_file: str, out: Path, radii, plot_data: bool,
                 path_file: str | None = None, workers=None):
    res = _load_lift(lift_file)
    path = _load_path(path_file) if path_file else None
    tol = cfg.tolerances
    rep = main_theorem_check(res, r=radii, path=path, J=cfg.J_kernel, J_theta=cfg.J_theta,
                             refine=cfg.refine, slack_bound=tol.slack_bound,
                             slack_chain=tol.slack_chain, tol_inner=tol.inner, workers=workers)
    _write_json(out / "report.json", rep.to_dict())
    (out / "report.csv").write_text(rep.to_csv())
    if plot_data:
        modulus, kernel = rep.plot_csv()
        (out / "plot_modulus.csv").write_text(modulus)
        (out / "plot_kernel.csv").write_text(kernel)
    return rep


# entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardylift", description="Lift paths of shift-invariant subspaces to inner functions.")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (overrides ${THREADS_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a projection path from a spec")
    g.add_argument("--config", required=True)
    g.add_argument("--out", default=None, help="output directory (default: config 'output')")

    li = sub.add_parser("lift", help="lift a projection path")
    li.add_argument("--path", required=True)
    li.add_argument("--config", default=None)
    li.add_argument("--out", default=None, help="output directory (default: next to --path)")

    v = sub.add_parser("verify", help="check the continuity estimates of a lift")
    v.add_argument("--lift", required=True)
    v.add_argument("--path", default=None, help="projection path (else rebuilt from the lift)")
    v.add_argument("--config", default=None)
    v.add_argument("--r", type=float, action="append", default=None,
                   help="radius in (0, 1); repeatable")
    v.add_argument("--plot-data", action="store_true", help="also write plotting tables")
    v.add_argument("--out", default=None, help="output directory (default: next to --lift)")

    r = sub.add_parser("report", help="run generate, lift and verify")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--plot-data", action="store_true")
    return parser


def _run(args) -> int:
    workers = thread_count(args.threads)
    cfg = _load_config(getattr(args, "config", None))
    if args.command == "generate":
        out = Path(args.out or cfg.output)
    elif args.command == "lift":
        out = Path(args.out) if args.out else Path(args.path).parent
    elif args.command == "verify":
        out = Path(args.out) if args.out else Path(args.lift).parent
    else:
        out = Path(args.out or cfg.output)
    manifest = RunManifest(cfg.sha256() if getattr(args, "config", None) else None, _versions())
    status = EXIT_OK

    def timed(name, fn, *a, **kw):
        start = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            manifest.timings[name] = round(time.perf_counter() - start, 3)

    try:
        if args.command == "report" and cfg.path_file is not None:
            raise InputError("report needs a 'spec' or 'fixture'; use lift for stored paths")
        if args.command in ("generate", "report"):
            manifest.summary["generate"] = timed("generate", stage_generate, cfg, out, workers)
        if args.command in ("lift", "report"):
            src = args.path if args.command == "lift" else str(out / "path.json")
            manifest.summary["lift"] = timed("lift", stage_lift, cfg, src, out, workers)
        if args.command in ("verify", "report"):
            lift_file = args.lift if args.command == "verify" else str(out / "lift.json")
            path_file = args.path if args.command == "verify" else str(out / "path.json")
            radii = tuple(args.r) if getattr(args, "r", None) else cfg.radii
            if any(not 0 < x < 1 for x in radii):
                raise InputError("every --r must lie in (0, 1)")
            rep = timed("verify", stage_verify, cfg, lift_file, out, radii, args.plot_data,
                        path_file, workers)
            manifest.summary["verify"] = rep.summary()
            if not rep.passed:
                print(f"verification failed: {rep.first_failure()}", file=sys.stderr)
                status = EXIT_FAIL
    except (LiftError, CertificateError) as exc:
        manifest.summary["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_FAIL
    manifest.summary["exitCode"] = status
    manifest.write(out)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (InputError, SpecError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HardyLiftError as exc:
        # remaining validation errors come from malformed input files
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
