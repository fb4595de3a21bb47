"""Experiment runner: MSD runs, step-count tables, convergence reports, sweeps.

Configs are flat ``key = value`` text, one key per line, ``#`` starts a
comment. Every output lands in ``<out>/<mode>-<hash>/`` where the hash is
taken over the fully resolved config, so identical experiments share a
directory and reruns overwrite it byte for byte (the manifest's wall time
aside).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .analysis import MsdRecorder, MsdSeries, detect_plateau, sample_particles, write_particles_csv
from .errors import ConfigError, TfbmError
from .grids import select_grid, uniform
from .mesh import Field, SpatialMesh, gaussian_initial_data, initial_condition, l2_norm, write_field_csv
from .oracle import exact_field
from .scheme import DEFAULT_SOLVER_TOL, SolverStats, run
from .special import ModelParams

MODES = ("run", "steps", "converge")

# Per-axis variances of the Gaussian initial data exp(-x^2 - 2 y^2).
_SIGMA2_X0, _SIGMA2_Y0 = 0.5, 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    hurst: tuple[float, ...]
    lam: float
    horizon: float
    tau: float = 0.05
    domain: tuple[float, float, float, float] = (-100.0, 100.0, -100.0, 100.0)
    mesh_m: int = 201
    mesh_n: int = 201
    mode: str = "run"
    snapshot_times: tuple[float, ...] = ()
    particles: int = 1000
    seed: int = 0
    solver_tol: float = DEFAULT_SOLVER_TOL
    levels: int = 3
    tau_fine: float = 1.0 / 4000.0
    mesh_fine: int = 401
    gnuplot: bool = False

    @property
    def params(self) -> ModelParams:
        if len(self.hurst) != 1:
            raise ConfigError(f"hurst: mode '{self.mode}' needs a single value; got {len(self.hurst)}")
        return ModelParams(self.hurst[0], self.lam)

    def mesh(self, nx: int | None = None, ny: int | None = None) -> SpatialMesh:
        return SpatialMesh.from_nodes(self.domain, nx or self.mesh_m, ny or self.mesh_n)

    def canonical(self) -> str:
        """Resolved config as ``key = value`` lines, sorted, floats in repr form."""
        lines = []
        for key, value in sorted(_to_text_items(self).items()):
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _to_text_items(cfg: ExperimentConfig) -> dict[str, str]:
    d = asdict(cfg)
    d["lambda"] = d.pop("lam")
    return {k: _fmt(v if not isinstance(v, list) else tuple(v)) for k, v in d.items()}


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(_float(p) for p in text.split(",")) if text else ()


def _int(text: str) -> int:
    return int(text.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _mode(text: str) -> str:
    t = text.strip()
    if t not in MODES:
        raise ValueError(f"expected one of {', '.join(MODES)}")
    return t


_PARSERS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "hurst": ("hurst", _floats),
    "lambda": ("lam", _float),
    "horizon": ("horizon", _float),
    "tau": ("tau", _float),
    "domain": ("domain", _floats),
    "mesh_m": ("mesh_m", _int),
    "mesh_n": ("mesh_n", _int),
    "mode": ("mode", _mode),
    "snapshot_times": ("snapshot_times", _floats),
    "particles": ("particles", _int),
    "seed": ("seed", _int),
    "solver_tol": ("solver_tol", _float),
    "levels": ("levels", _int),
    "tau_fine": ("tau_fine", _float),
    "mesh_fine": ("mesh_fine", _int),
    "gnuplot": ("gnuplot", _bool),
}
_REQUIRED = ("hurst", "lambda", "horizon")


def parse_config(text: str, mode: str | None = None) -> ExperimentConfig:
    """Parse and validate flat ``key = value`` text; all problems are reported at once.

    A non-``None`` ``mode`` overrides the ``mode`` key (the CLI verb wins).
    """
    errors: list[str] = []
    values: dict[str, Any] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if key not in _PARSERS:
            errors.append(f"{key}: unknown key")
            continue
        if key in seen:
            errors.append(f"{key}: given more than once")
            continue
        seen.add(key)
        attr, parse = _PARSERS[key]
        try:
            values[attr] = parse(value)
        except ValueError as exc:
            errors.append(f"{key}: cannot parse {value.strip()!r} ({exc})")
    for key in _REQUIRED:
        if key not in seen:
            errors.append(f"{key}: required")
    if mode is not None:
        values["mode"] = mode
    merged = {f.name: f.default for f in fields(ExperimentConfig) if f.default is not MISSING}
    merged.update(values)
    errors.extend(_problems(merged))
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    return ExperimentConfig(**values)


def _problems(v: dict[str, Any]) -> list[str]:
    """Field-level validation messages; keys absent from ``v`` are skipped."""
    errors: list[str] = []
    hurst = v.get("hurst")
    if hurst is not None:
        if not hurst:
            errors.append("hurst: at least one value required")
        for H in hurst:
            if not 0.0 < H < 1.0:
                errors.append(f"hurst: {H!r} outside (0, 1)")
            elif H == 0.5:
                errors.append("hurst: 0.5 (plain Brownian motion) is not handled by either scheme")
        if v["mode"] != "steps" and len(hurst) > 1:
            errors.append(f"hurst: mode '{v['mode']}' needs a single value")
    for key, attr in (("lambda", "lam"), ("horizon", "horizon"), ("tau", "tau"), ("tau_fine", "tau_fine")):
        if attr in v and not v[attr] > 0.0:
            errors.append(f"{key}: must be positive; got {v[attr]!r}")
    dom = v["domain"]
    if len(dom) != 4:
        errors.append("domain: expected x_min,x_max,y_min,y_max")
    elif not (dom[0] < dom[1] and dom[2] < dom[3]):
        errors.append("domain: need x_min < x_max and y_min < y_max")
    for key in ("mesh_m", "mesh_n", "mesh_fine"):
        if v[key] < 3:
            errors.append(f"{key}: node count must be at least 3; got {v[key]}")
    if "horizon" in v:
        for ts in v["snapshot_times"]:
            if not 0.0 <= ts <= v["horizon"]:
                errors.append(f"snapshot_times: {ts!r} outside [0, horizon]")
    if v["particles"] < 0:
        errors.append("particles: must be nonnegative")
    if not 0.0 < v["solver_tol"] < 1.0:
        errors.append(f"solver_tol: must lie in (0, 1); got {v['solver_tol']!r}")
    if v["levels"] < 2:
        errors.append("levels: need at least 2 refinement levels")
    return errors


def validate(cfg: ExperimentConfig) -> None:
    errors = _problems(asdict(cfg))
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))


def load_config(path: str | Path, mode: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, mode)


def run_directory(cfg: ExperimentConfig, out_root: str | Path, mode: str | None = None) -> Path:
    mode = mode or cfg.mode
    path = Path(out_root) / f"{mode}-{replace(cfg, mode=mode).digest()}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _tag(t: float) -> str:
    return f"{t:g}"


def _write_manifest(path: Path, manifest: dict[str, Any]) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _grid_summary(grid) -> dict[str, Any]:
    return {
        "law": grid.law.value,
        "steps": grid.steps,
        "tau": grid.tau,
        "last_node": float(grid.nodes[-1]),
        "splice_index": grid.splice_index,
        "t_splice": grid.t_splice,
    }


class _SnapshotSink:
    """Records the MSD and interpolates fields linearly in time at requested instants."""

    def __init__(self, mesh: SpatialMesh, times: Sequence[float]):
        self.recorder = MsdRecorder(mesh)
        self.pending = sorted(set(times))
        self.snapshots: dict[float, Field] = {}
        self._prev: tuple[float, np.ndarray] | None = None

    def __call__(self, k: int, t: float, u: Field) -> None:
        self.recorder(k, t, u)
        while self.pending and self.pending[0] <= t:
            ts = self.pending.pop(0)
            if self._prev is None or t == ts:
                self.snapshots[ts] = u.copy()
            else:
                t0, v0 = self._prev
                w = (ts - t0) / (t - t0)
                self.snapshots[ts] = Field((1.0 - w) * v0 + w * u.values)
        if self.pending:
            self._prev = (t, u.values.copy())


@dataclass
class RunResult:
    run_dir: Path
    series: MsdSeries
    manifest: dict[str, Any]
    snapshots: dict[float, Field] = field(default_factory=dict)


def run_experiment(cfg: ExperimentConfig, out_root: str | Path) -> RunResult:
    """Gaussian initial data marched to the horizon; writes MSD, snapshots, particles, manifest."""
    params = cfg.params
    mesh = cfg.mesh()
    grid = select_grid(params, cfg.tau, cfg.horizon)
    u0 = initial_condition(mesh, gaussian_initial_data)
    sink = _SnapshotSink(mesh, cfg.snapshot_times)
    stats = SolverStats()
    start = time.perf_counter()
    run(params, mesh, grid, u0, sink=sink, solver_tol=cfg.solver_tol, stats=stats)
    wall = time.perf_counter() - start

    out = run_directory(cfg, out_root, "run")
    series = sink.recorder.series.truncated(cfg.horizon)
    series.plateau_estimate = detect_plateau(series)
    files = ["msd.csv"]
    series.write_csv(out / "msd.csv")
    for i, ts in enumerate(sorted(sink.snapshots)):
        snap = sink.snapshots[ts]
        name = f"snapshot_t{_tag(ts)}.csv"
        write_field_csv(out / name, snap, mesh)
        files.append(name)
        if cfg.particles:
            pts = sample_particles(snap, mesh, cfg.particles, cfg.seed + i)
            name = f"particles_t{_tag(ts)}.csv"
            write_particles_csv(out / name, pts)
            files.append(name)
    if cfg.gnuplot:
        (out / "msd.gp").write_text(_msd_gnuplot(params))
        files.append("msd.gp")
    (out / "config.txt").write_text(cfg.canonical())

    manifest = {
        "version": __version__,
        "mode": "run",
        "config": _to_text_items(cfg),
        "config_hash": cfg.digest(),
        "mesh": {"M": mesh.M, "N": mesh.N, "h": mesh.h, "l": mesh.l},
        "grid": _grid_summary(grid),
        "uniform_steps": uniform(cfg.tau, cfg.horizon).steps,
        "initial_data": "exp(-x^2 - 2 y^2)",
        "solver": {
            "tol": cfg.solver_tol,
            "max_iter": 10 * mesh.M * mesh.N,
            "iterations_total": stats.iterations,
            "identity_steps": stats.identity_steps,
        },
        "plateau_estimate": series.plateau_estimate,
        "particle_seeds": [cfg.seed + i for i in range(len(sink.snapshots))] if cfg.particles else [],
        "wall_time_s": wall,
        "files": files,
    }
    _write_manifest(out / "manifest.json", manifest)
    return RunResult(out, series, manifest, sink.snapshots)


def _msd_gnuplot(params: ModelParams) -> str:
    return (
        "set datafile separator ','\n"
        "set key top left\n"
        "set xlabel 't'\n"
        "set ylabel 'MSD'\n"
        f"plot 'msd.csv' using 1:5 skip 1 with lines title 'H={params.hurst:g}, lambda={params.lam:g}'\n"
    )


STEPS_HEADER = ["hurst", "lambda", "tau", "horizon", "law", "nonuniform_steps", "uniform_steps", "ratio"]


def step_counts(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Nonuniform vs uniform step counts at equal tau, one row per Hurst value."""
    rows = []
    for H in cfg.hurst:
        grid = select_grid(ModelParams(H, cfg.lam), cfg.tau, cfg.horizon)
        n_uni = uniform(cfg.tau, cfg.horizon).steps
        rows.append({
            "hurst": H,
            "lambda": cfg.lam,
            "tau": cfg.tau,
            "horizon": cfg.horizon,
            "law": grid.law.value,
            "nonuniform_steps": grid.steps,
            "uniform_steps": n_uni,
            "ratio": grid.steps / n_uni,
        })
    return rows


def write_steps(cfg: ExperimentConfig, out_root: str | Path) -> Path:
    rows = step_counts(cfg)
    out = run_directory(cfg, out_root, "steps")
    lines = [",".join(STEPS_HEADER)]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in STEPS_HEADER))
    (out / "steps.csv").write_text("\n".join(lines) + "\n")
    (out / "config.txt").write_text(cfg.canonical())
    if cfg.gnuplot:
        (out / "steps.gp").write_text(
            "set datafile separator ','\n"
            "set style data histograms\n"
            "set logscale y\n"
            "plot 'steps.csv' using 6:xtic(1) skip 1 title 'nonuniform', '' using 7 skip 1 title 'uniform'\n"
        )
    _write_manifest(out / "manifest.json", {
        "version": __version__,
        "mode": "steps",
        "config": _to_text_items(cfg),
        "config_hash": cfg.digest(),
        "rows": rows,
    })
    return out


def fitted_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    slope, _ = np.polyfit(np.log(np.asarray(steps, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


def oracle_error(params: ModelParams, mesh: SpatialMesh, tau: float, horizon: float, solver_tol: float) -> float:
    """Weighted L2 distance between the computed and exact fields at the final node."""
    grid = select_grid(params, tau, horizon)
    u0 = initial_condition(mesh, gaussian_initial_data)
    u = run(params, mesh, grid, u0, solver_tol=solver_tol)
    exact = exact_field(params, mesh, _SIGMA2_X0, _SIGMA2_Y0, float(grid.nodes[-1]), scale="initial")
    return l2_norm(Field(u.values - exact.values), mesh)


CONVERGENCE_HEADER = ["axis", "level", "step", "error", "order"]


def convergence_report(cfg: ExperimentConfig, out_root: str | Path | None = None) -> dict[str, Any]:
    """Errors against the Gaussian oracle under h-halving and tau-halving.

    Space: node counts ``n, 2n - 1, 4n - 3, ...`` from ``mesh_m`` x ``mesh_n``
    at step ``tau_fine``. Time: ``tau, tau/2, ...`` on a ``mesh_fine`` square
    mesh. Each row's order compares it with the previous level; ``fitted``
    holds the least-squares slope per axis.
    """
    params = cfg.params
    rows: list[dict[str, Any]] = []
    fitted: dict[str, float] = {}
    start = time.perf_counter()

    space_steps, space_errs = [], []
    for level in range(cfg.levels):
        f = 2**level
        mesh = cfg.mesh(f * (cfg.mesh_m - 1) + 1, f * (cfg.mesh_n - 1) + 1)
        space_steps.append(mesh.h)
        space_errs.append(oracle_error(params, mesh, cfg.tau_fine, cfg.horizon, cfg.solver_tol))
    time_steps, time_errs = [], []
    fine = cfg.mesh(cfg.mesh_fine, cfg.mesh_fine)
    for level in range(cfg.levels):
        tau = cfg.tau / 2**level
        time_steps.append(tau)
        time_errs.append(oracle_error(params, fine, tau, cfg.horizon, cfg.solver_tol))

    for axis, steps, errs in (("space", space_steps, space_errs), ("time", time_steps, time_errs)):
        for i, (s, e) in enumerate(zip(steps, errs)):
            order = math.log(errs[i - 1] / e) / math.log(steps[i - 1] / s) if i else None
            rows.append({"axis": axis, "level": i, "step": s, "error": e, "order": order})
        fitted[axis] = fitted_order(steps, errs)

    report = {"rows": rows, "fitted": fitted, "wall_time_s": time.perf_counter() - start}
    if out_root is not None:
        out = run_directory(cfg, out_root, "converge")
        lines = [",".join(CONVERGENCE_HEADER)]
        for r in rows:
            order = "" if r["order"] is None else f"{r['order']:.17g}"
            lines.append(f"{r['axis']},{r['level']},{r['step']:.17g},{r['error']:.17g},{order}")
        for axis, slope in fitted.items():
            lines.append(f"{axis},fit,,,{slope:.17g}")
        (out / "convergence.csv").write_text("\n".join(lines) + "\n")
        (out / "config.txt").write_text(cfg.canonical())
        _write_manifest(out / "manifest.json", {
            "version": __version__,
            "mode": "converge",
            "config": _to_text_items(cfg),
            "config_hash": cfg.digest(),
            "initial_data": "exp(-x^2 - 2 y^2)",
            **report,
        })
        report["run_dir"] = out
    return report


def execute(cfg: ExperimentConfig, out_root: str | Path, mode: str | None = None) -> Path:
    """Dispatch on ``mode`` (default: the config's own) and return the run directory."""
    mode = mode or cfg.mode
    cfg = replace(cfg, mode=mode)
    validate(cfg)
    if mode == "steps":
        return write_steps(cfg, out_root)
    if mode == "converge":
        return convergence_report(cfg, out_root)["run_dir"]
    return run_experiment(cfg, out_root).run_dir


def _sweep_one(path: str, out_root: str) -> tuple[str, str | None, str | None]:
    try:
        return path, str(execute(load_config(path), out_root)), None
    except (TfbmError, OSError) as exc:
        return path, None, str(exc)


def sweep(config_dir: str | Path, out_root: str | Path, jobs: int | None = None) -> list[tuple[str, str | None, str | None]]:
    """Run every ``*.cfg`` file in a directory, in parallel across processes."""
    paths = sorted(str(p) for p in Path(config_dir).glob("*.cfg"))
    if not paths:
        raise ConfigError(f"no *.cfg files in {config_dir}")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_one, paths, [str(out_root)] * len(paths)))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tfbmfp", description="Tempered fBm Fokker-Planck experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
        ("run", "march Gaussian data and write MSD, snapshots and particles"),
        ("steps", "tabulate nonuniform vs uniform step counts"),
        ("converge", "observed convergence orders against the exact Gaussian solution"),
    ):
        sp = sub.add_parser(verb, help=help_text)
        sp.add_argument("config", type=Path)
        sp.add_argument("--out", type=Path, default=Path("runs"), help="output root (default: runs)")
    sp = sub.add_parser("sweep", help="run every *.cfg in a directory according to its mode")
    sp.add_argument("config_dir", type=Path)
    sp.add_argument("--out", type=Path, default=Path("runs"))
    sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "sweep":
            failed = 0
            for path, run_dir, err in sweep(args.config_dir, args.out, args.jobs):
                if err is None:
                    print(f"{path}: {run_dir}")
                else:
                    failed += 1
                    print(f"error: {path}: {err}", file=sys.stderr)
            return 1 if failed else 0
        print(execute(load_config(args.config, args.verb), args.out))
        return 0
    except (TfbmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
