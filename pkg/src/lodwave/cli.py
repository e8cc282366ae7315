"""Configuration-driven experiment runner and the ``lodwave`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import build_fine_operators, sample_coefficient
from .correctors import (
    assemble_multiscale,
    build_corrector_basis,
    coefficient_hash,
    load_basis,
    save_basis,
)
from .experiments import compute_errors, write_eoc_csv, write_errors_csv
from .interpolation import build_clement
from .mesh import build_structured_mesh, build_two_level, vertex_permutation, write_vtk
from .problems import PROBLEM_IDS, coefficient_range, get_problem
from .wavesolve import Trajectory, multiscale_solve, reference_solve

log = logging.getLogger("lodwave")

LOG_COUPLED = "log-coupled"


@dataclass
class ExperimentConfig:
    problem_id: str
    H_exponents: list
    h_exponent: int
    k_values: list | str = LOG_COUPLED
    k_offset: float = 1.0
    dt: float = 0.05
    T: float = 1.0
    f_projection: str = "elliptic"
    g_projection: str = "l2"
    cg_tol: float = 1e-10
    saddle_method: str = "direct"
    saddle_outer_tol: float = 1e-9
    saddle_inner_tol: float = 1e-11
    threads: int = 1
    output_dir: str = "out"
    emit_vtk: bool = False
    corrector_cache: str | None = None
    problem_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.problem_id = str(self.problem_id).upper()
        self.H_exponents = [int(e) for e in self.H_exponents]
        if not isinstance(self.k_values, str):
            self.k_values = [int(k) for k in self.k_values]
        self.validate()

    def validate(self):
        if self.problem_id not in PROBLEM_IDS:
            raise ValueError(f"problem_id must be one of {PROBLEM_IDS}")
        if not self.H_exponents:
            raise ValueError("H_exponents is empty")
        if self.h_exponent <= max(self.H_exponents):
            raise ValueError("h_exponent must exceed every H exponent (h <= H/2)")
        if min(self.H_exponents) < 1 and self.problem_id != "MP1":
            raise ValueError("H exponents must be >= 1 on the unit square")
        if isinstance(self.k_values, str):
            if self.k_values != LOG_COUPLED:
                raise ValueError(f"k_values must be a list or {LOG_COUPLED!r}")
        elif not self.k_values or min(self.k_values) < 0:
            raise ValueError("k_values must be non-negative")
        J = self.T / self.dt
        if self.dt <= 0 or abs(J - round(J)) > 1e-12 * max(J, 1.0):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")
        if self.f_projection not in ("elliptic", "l2") or self.g_projection not in ("elliptic", "l2"):
            raise ValueError("projections must be 'elliptic' or 'l2'")
        if self.saddle_method not in ("direct", "cg"):
            raise ValueError("saddle_method must be 'direct' or 'cg'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def J(self) -> int:
        return int(round(self.T / self.dt))

    def ks_for(self, H_exp: int) -> list[int]:
        if self.k_values == LOG_COUPLED:
            return [log_coupled_k(2.0**-H_exp, self.k_offset)]
        return list(self.k_values)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "config" in data and "problem_id" not in data:
            data = data["config"]
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def log_coupled_k(H: float, c: float) -> int:
    """``floor(|ln H| + c)``."""
    return int(math.floor(abs(math.log(H)) + c))


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")
        self.stage = stage


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    log.info("stage %s", name)
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(name, exc) from exc
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def _permuted(traj: Trajectory, cols: np.ndarray) -> Trajectory:
    eta = None if traj.eta is None else traj.eta[:, cols]
    return Trajectory(traj.times, traj.xi[:, cols], eta, traj.reports)


def run_experiment(config: ExperimentConfig, dry_run: bool = False) -> dict:
    """Reference once, then correctors + multiscale solve + errors at ``T`` for every (H, k)."""
    out = Path(config.output_dir)
    plan = [(He, k) for He in config.H_exponents for k in config.ks_for(He)]
    summary = {"config": config.to_dict(), "plan": [{"H_exp": He, "k": k} for He, k in plan]}
    if dry_run:
        return summary

    out.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    reports: dict = {}
    with _stage("problem", timings):
        problem = get_problem(config.problem_id, **dict(config.problem_params))
        h = 2.0**-config.h_exponent
        L = problem.domain.side
        fine_ref = build_structured_mesh(problem.domain, int(round(L / h)))
        field_ref = sample_coefficient(problem.coefficient, fine_ref)
        ops_ref = build_fine_operators(fine_ref, field_ref)
        summary["coefficient_range"] = list(coefficient_range(problem, fine_ref.barycenters()))
    with _stage("reference", timings):
        ref = reference_solve(ops_ref, problem, config.dt, config.J, tol=config.cg_tol)
        reports["reference_cg"] = {
            "steps": len(ref.reports),
            "max_iterations": max((r.iterations for r in ref.reports), default=0),
            "max_relative_residual": max((r.relative_residual for r in ref.reports), default=0.0),
        }

    records, series, snapshots = [], {}, {}
    n_final = config.J
    for He in config.H_exponents:
        with _stage(f"hierarchy H=2^-{He}", timings):
            hier = build_two_level(problem.domain, 2.0**-He, h)
            field_h = sample_coefficient(problem.coefficient, hier.fine)
            ops = build_fine_operators(hier.fine, field_h)
            clement = build_clement(hier)
            perm = vertex_permutation(fine_ref, hier.fine)
            ref_index = fine_ref.interior_node_index[perm[hier.fine.interior_nodes]]
            ref_h = _permuted(ref, ref_index)
        for k in config.ks_for(He):
            tag = f"H=2^-{He},k={k}"
            with _stage(f"correctors {tag}", timings):
                basis = None
                cache = None
                if config.corrector_cache:
                    cache = Path(config.corrector_cache)
                    cache.mkdir(parents=True, exist_ok=True)
                    cache = cache / f"basis_{config.problem_id}_H{He}_h{config.h_exponent}_k{k}.npz"
                    basis = load_basis(cache, clement, coefficient_hash(field_h), k)
                if basis is None:
                    basis = build_corrector_basis(
                        hier, ops.A_full, field_h, clement, k, threads=config.threads, method=config.saddle_method
                    )
                    if cache is not None:
                        save_basis(cache, basis)
                reports[f"correctors {tag}"] = basis.stats
            with _stage(f"multiscale {tag}", timings):
                ms = assemble_multiscale(basis, ops.A_h, ops.M_h)
                traj = multiscale_solve(
                    ms, basis, ops, problem, config.dt, config.J, config.f_projection, config.g_projection
                )
            with _stage(f"errors {tag}", timings):
                rec = compute_errors(traj, basis, ref_h, ops, n_final, He, config.h_exponent, k)
                records.append(rec)
                name = "k(H)" if config.k_values == LOG_COUPLED else f"k={k}"
                series.setdefault(name, []).append(rec)
            if config.emit_vtk:
                snapshots[tag] = (hier, basis, traj, ref_h)

    with _stage("output", timings):
        write_errors_csv(out / "errors.csv", records)
        write_eoc_csv(out / "eoc.csv", series)
        if config.emit_vtk:
            _write_snapshots(out, config, snapshots)
        summary.update(
            timings=timings,
            solver_reports=reports,
            results=[r.row() for r in records],
        )
        (out / "run.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return summary


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_snapshots(out: Path, config: ExperimentConfig, snapshots: dict) -> None:
    for tag, (hier, basis, traj, ref) in snapshots.items():
        safe = tag.replace("^", "").replace("=", "").replace(",", "_")
        fine = hier.fine
        for t in (0.0, 0.5 * config.T, config.T):
            n = traj.index_of(t)
            u_ref = np.zeros(fine.n_vertices)
            u_ms = np.zeros(fine.n_vertices)
            u_ref[fine.interior_nodes] = ref.xi[n]
            u_ms[fine.interior_nodes] = basis.reconstruct(traj.xi[n])
            write_vtk(out / f"snapshot_{safe}_t{t:g}.vtk", fine, {"u_ref": u_ref, "u_ms": u_ms}, title=f"{tag} t={t:g}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lodwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--dry-run", action="store_true", help="validate and print the resolved config only")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    run.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        data = json.loads(args.config.read_text())
        if args.threads is not None:
            data = {**data, "threads": args.threads}
        if args.out is not None:
            data = {**data, "output_dir": str(args.out)}
        config = ExperimentConfig.from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        print(f"lodwave: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(config, dry_run=args.dry_run)
    except ExperimentError as exc:
        print(f"lodwave: {exc}", file=sys.stderr)
        return 1
    if args.dry_run:
        print(json.dumps(summary, indent=2))
    else:
        for row in summary["results"]:
            print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
