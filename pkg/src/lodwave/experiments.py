"""Relative errors against the fine reference, EOC tables and their CSV layout."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .assembly import FineOperators
from .correctors import CorrectorBasis
from .wavesolve import Trajectory

NORMS = ("e0_L2_rel", "ems_L2_rel", "ems_H1_rel", "dtems_L2_rel", "dtems_H1_rel")
ERROR_COLUMNS = ("H_exp", "k") + NORMS


@dataclass(frozen=True)
class ErrorRecord:
    H_exp: int
    h_exp: int
    k: int
    dt: float
    t_n: float
    e0_L2_rel: float
    ems_L2_rel: float
    ems_H1_rel: float
    dtems_L2_rel: float
    dtems_H1_rel: float

    def row(self) -> dict:
        d = asdict(self)
        return {c: d[c] for c in ERROR_COLUMNS}


class Norms:
    """L2 and full H1 norms of fine interior vectors."""

    def __init__(self, fine_ops: FineOperators):
        self.M = fine_ops.M_h
        self.H1 = (fine_ops.A1_h + fine_ops.M_h).tocsr()

    def l2(self, v) -> float:
        return math.sqrt(max(float(v @ (self.M @ v)), 0.0))

    def h1(self, v) -> float:
        return math.sqrt(max(float(v @ (self.H1 @ v)), 0.0))


def compute_errors(ms_traj: Trajectory, basis: CorrectorBasis, ref_traj: Trajectory, fine_ops: FineOperators, n: int,
                   H_exp: int = 0, h_exp: int = 0, k: int | None = None) -> ErrorRecord:
    """Relative errors of the multiscale trajectory at step ``n``.

    ``e0`` compares only the coarse part ``sum xi_i Phi_i``; time derivatives
    are backward differences of both piecewise linear trajectories.
    """
    if n < 1:
        raise ValueError("time-derivative errors need n >= 1")
    if ms_traj.J != ref_traj.J or not np.isclose(ms_traj.dt, ref_traj.dt, rtol=1e-12, atol=0):
        raise ValueError("trajectories use different time grids")
    norms = Norms(fine_ops)
    ref = ref_traj.xi[n]
    u_ms = basis.reconstruct(ms_traj.xi[n])
    u_0 = basis.coarse_part(ms_traj.xi[n])
    d_ref = ref_traj.derivative(n)
    d_ms = basis.reconstruct(ms_traj.derivative(n))

    def rel(err, full, norm):
        denom = norm(full)
        if denom == 0.0:
            raise ZeroDivisionError("reference norm vanishes")
        return norm(err) / denom

    return ErrorRecord(
        H_exp=int(H_exp),
        h_exp=int(h_exp),
        k=int(basis.k if k is None else k),
        dt=float(ms_traj.dt),
        t_n=float(ms_traj.times[n]),
        e0_L2_rel=rel(u_0 - ref, ref, norms.l2),
        ems_L2_rel=rel(u_ms - ref, ref, norms.l2),
        ems_H1_rel=rel(u_ms - ref, ref, norms.h1),
        dtems_L2_rel=rel(d_ms - d_ref, d_ref, norms.l2),
        dtems_H1_rel=rel(d_ms - d_ref, d_ref, norms.h1),
    )


@dataclass(frozen=True)
class EOCTable:
    H: tuple
    errors: tuple
    steps: tuple
    average: float


def compute_eoc(pairs) -> EOCTable:
    """``log2(e_H / e_{H/2})`` for consecutive halvings and their plain average."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (H, error) pairs")
    Hs = [float(H) for H, _ in pairs]
    errs = [float(e) for _, e in pairs]
    for a, b in zip(Hs, Hs[1:]):
        if not math.isclose(b, a / 2, rel_tol=1e-12):
            raise ValueError(f"H sequence must halve, got {a} -> {b}")
    if min(errs) <= 0:
        raise ValueError("errors must be positive")
    steps = tuple(math.log2(a / b) / math.log2(2) for a, b in zip(errs, errs[1:]))
    return EOCTable(tuple(Hs), tuple(errs), steps, sum(steps) / len(steps))


def eoc_by_norm(records) -> dict[str, EOCTable]:
    records = sorted(records, key=lambda r: r.H_exp)
    return {norm: compute_eoc([(2.0**-r.H_exp, getattr(r, norm)) for r in records]) for norm in NORMS}


def write_errors_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ERROR_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({key: repr(v) if isinstance(v, float) else v for key, v in r.row().items()})


def read_errors_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{key: (int(v) if key in ("H_exp", "k") else float(v)) for key, v in row.items()} for row in rows]


def write_eoc_csv(path, series: dict) -> None:
    """One block per series (e.g. ``k(H)`` or ``k=2``): error rows, step EOCs and the average."""
    cols = ("series", "kind", "H_exp", "k") + NORMS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for name, records in series.items():
            records = sorted(records, key=lambda r: r.H_exp)
            for r in records:
                w.writerow([name, "error", r.H_exp, r.k] + [repr(getattr(r, n)) for n in NORMS])
            if len(records) < 2:
                continue
            table = eoc_by_norm(records)
            for i in range(len(records) - 1):
                w.writerow([name, "eoc_step", f"{records[i].H_exp}->{records[i + 1].H_exp}", ""]
                           + [repr(table[n].steps[i]) for n in NORMS])
            w.writerow([name, "eoc_average", "", ""] + [repr(table[n].average) for n in NORMS])
