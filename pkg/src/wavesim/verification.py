"""Manufactured-solution checks: pointwise tables, error norms, surfaces."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, build_grid
from .model import ProblemSpec, example_spec, exact_profile
from .timestepper import Trajectory, run_simulation

TABLE1_X = 0.8
TABLE1_STEPS = (10, 20, 30)
TABLE2_SIZES = ((50, 50), (100, 100), (150, 150), (200, 200))
THREADS_ENV = "WAVE_SIM_THREADS"


def exact_solution(x, t):
    """Return ``(u_ex, v_ex)``; broadcasts over arrays."""
    x = np.asarray(x, dtype=float)
    g = exact_profile(t)
    u, v = x * g, (1 - x) * g
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


@dataclass
class ErrorReport:
    K: int
    N: int
    T: float
    sweeps: int
    err_u: float
    err_v: float
    pointwise: list[tuple[float, float, float, float, float]] | None = field(default=None, repr=False)


def error_norms(traj: Trajectory, grid: Grid, sweeps: int | None = None) -> ErrorReport:
    """Entry-wise max errors.

    u is scanned over k = 1..K, n = 1..N. v is scanned over its stored nodes
    k = 0..K-1 and n = 0..N-1.
    """
    X, Tt = np.meshgrid(grid.x, grid.t)
    ue, ve = exact_solution(X, Tt)
    u, v = traj.u_nodes(), traj.v_nodes()
    err_u = float(np.abs(ue - u)[1:, 1:].max())
    err_v = float(np.abs(ve - v)[:-1, :-1].max())
    m = traj.iterate_index if sweeps is None else sweeps
    return ErrorReport(grid.K, grid.N, grid.T, m, err_u, err_v)


@dataclass(frozen=True)
class Table1Row:
    field: str
    n: int
    t: float
    exact: float
    computed: float

    @property
    def abs_err(self) -> float:
        return abs(self.exact - self.computed)


def table1_from(traj: Trajectory, grid: Grid, steps=TABLE1_STEPS) -> list[Table1Row]:
    if grid.K % 5:
        raise ValueError(f"K = {grid.K} is not a multiple of 5, so x = 4/5 is not a node")
    k = 4 * grid.K // 5
    bad = [n for n in steps if not 0 <= n <= grid.N]
    if bad:
        raise ValueError(f"steps {bad} fall outside 0..{grid.N}")
    u, v = traj.u_nodes(), traj.v_nodes()
    rows = []
    for name, arr, idx in (("u", u, 0), ("v", v, 1)):
        for n in steps:
            ex = exact_solution(grid.x[k], grid.t[n])[idx]
            rows.append(Table1Row(name, n, float(grid.t[n]), ex, float(arr[n, k])))
    return rows


def reproduce_table1(sweeps: int = 5, K: int = 50, N: int = 50, T: float = 20.0,
                     spec: ProblemSpec | None = None) -> list[Table1Row]:
    if K % 5:
        raise ValueError(f"K = {K} is not a multiple of 5, so x = 4/5 is not a node")
    grid = build_grid(K, N, T)
    traj, _ = run_simulation(spec or example_spec(), grid, sweeps, track_residual=False)
    return table1_from(traj, grid)


def _table2_row(args) -> ErrorReport:
    K, N, T, sweeps, spec = args
    grid = build_grid(K, N, T)
    traj, _ = run_simulation(spec, grid, sweeps, track_residual=False)
    return error_norms(traj, grid, sweeps)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def reproduce_table2(sizes=TABLE2_SIZES, T: float = 20.0, sweeps: int = 5,
                     spec: ProblemSpec | None = None, workers: int | None = None) -> list[ErrorReport]:
    spec = spec or example_spec()
    jobs = [(int(K), int(N), T, sweeps, spec) for K, N in sizes]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_table2_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_table2_row, jobs))


@dataclass
class SurfaceData:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_ex: np.ndarray
    v_ex: np.ndarray

    def rows(self):
        """Flattened ``(x, t, u, v, u_ex, v_ex)`` rows, time-major."""
        X, Tt = np.meshgrid(self.x, self.t)
        cols = (X, Tt, self.u, self.v, self.u_ex, self.v_ex)
        return np.column_stack([c.ravel() for c in cols])

    def max_deviation(self) -> float:
        return float(max(np.abs(self.u - self.u_ex).max(), np.abs(self.v - self.v_ex).max()))


def surface_data(traj: Trajectory, grid: Grid) -> SurfaceData:
    X, Tt = np.meshgrid(grid.x, grid.t)
    ue, ve = exact_solution(X, Tt)
    return SurfaceData(grid.x.copy(), grid.t.copy(), traj.u_nodes(), traj.v_nodes(), ue, ve)
