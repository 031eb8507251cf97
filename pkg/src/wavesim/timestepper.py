"""Implicit Euler marching wrapped in full-trajectory Picard sweeps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .discretization import (
    Grid,
    StageSystem,
    StateVector,
    assemble_stage,
    discretize_initial,
    semi_discrete_rhs,
)
from .model import ProblemSpec

PIVOT_RTOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class SimulationError(RuntimeError):
    """A stage solve failed; ``sweep`` and ``step`` locate the failure."""

    def __init__(self, sweep: int, step: int, cause: Exception):
        super().__init__(f"sweep {sweep}, step {step}: {cause}")
        self.sweep = sweep
        self.step = step
        self.cause = cause


def solve_linear(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense LU solve with partial pivoting.

    Raises SingularMatrixError when a pivot is below ``1e-14 * ||M||_inf``.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if b.shape[0] != M.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match matrix size {M.shape[0]}")
    scale = np.abs(M).sum(axis=1).max() if M.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(M, check_finite=True)
    if np.abs(np.diag(lu)).min() < PIVOT_RTOL * scale:
        raise SingularMatrixError("pivot below tolerance")
    return lu_solve((lu, piv), b)


def _advance(block: np.ndarray, mat: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
    return solve_linear(np.eye(mat.shape[0]) - dt * mat, block + dt * rhs)


def implicit_euler_step(prev: StateVector, stage_u: StageSystem, stage_v: StageSystem,
                        dt: float) -> StateVector:
    return StateVector(
        _advance(prev.u_block, stage_u.A, stage_u.F1_vec, dt),
        _advance(prev.v_block, stage_v.B, stage_v.F2_vec, dt),
    )


@dataclass
class Trajectory:
    """Stacked states; row n of ``U`` and ``V`` is the state at t_n."""

    U: np.ndarray
    V: np.ndarray
    iterate_index: int

    def __len__(self) -> int:
        return self.U.shape[0]

    def state(self, n: int) -> StateVector:
        return StateVector(self.U[n].copy(), self.V[n].copy())

    @property
    def states(self) -> list[StateVector]:
        return [self.state(n) for n in range(len(self))]

    def u_nodes(self) -> np.ndarray:
        """u on the full (N+1) x (K+1) space-time grid."""
        K = self.U.shape[1] // 2
        out = np.zeros((len(self), K + 1))
        out[:, 1:] = self.U[:, :K]
        return out

    def v_nodes(self) -> np.ndarray:
        K = self.V.shape[1] // 2
        out = np.zeros((len(self), K + 1))
        out[:, :-1] = self.V[:, :K]
        return out

    def ut_nodes(self) -> np.ndarray:
        K = self.U.shape[1] // 2
        out = np.zeros((len(self), K + 1))
        out[:, 1:] = self.U[:, K:]
        return out

    def vt_nodes(self) -> np.ndarray:
        K = self.V.shape[1] // 2
        out = np.zeros((len(self), K + 1))
        out[:, :-1] = self.V[:, K:]
        return out


@dataclass
class SweepDiagnostics:
    sweep_deltas: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)

    @property
    def sweeps(self) -> int:
        return len(self.sweep_deltas)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def nonlinear_defect(traj: Trajectory, spec: ProblemSpec, grid: Grid) -> float:
    """Sup-norm defect of ``traj`` in the nonlinear backward Euler equations."""
    worst = 0.0
    for n in range(grid.N):
        t1 = grid.t[n + 1]
        rhs = semi_discrete_rhs(traj.state(n + 1), t1, spec, grid)
        du = traj.U[n + 1] - traj.U[n] - grid.dt * rhs.u_block
        dv = traj.V[n + 1] - traj.V[n] - grid.dt * rhs.v_block
        worst = max(worst, float(np.abs(du).max()), float(np.abs(dv).max()))
    return worst


def picard_sweep(prev: Trajectory, spec: ProblemSpec, grid: Grid) -> Trajectory:
    m = prev.iterate_index + 1
    U = np.empty_like(prev.U)
    V = np.empty_like(prev.V)
    U[0], V[0] = prev.U[0], prev.V[0]
    current = prev.state(0)
    for n in range(grid.N):
        t1 = grid.t[n + 1]
        stage = assemble_stage(prev.state(n + 1), t1, spec, grid)
        try:
            current = implicit_euler_step(current, stage, stage, grid.dt)
        except np.linalg.LinAlgError as exc:
            raise SimulationError(m, n, exc) from exc
        U[n + 1], V[n + 1] = current.u_block, current.v_block
    return Trajectory(U, V, m)


def initial_iterate(spec: ProblemSpec, grid: Grid) -> Trajectory:
    s0 = discretize_initial(spec, grid)
    return Trajectory(np.tile(s0.u_block, (grid.N + 1, 1)), np.tile(s0.v_block, (grid.N + 1, 1)), 0)


def run_simulation(spec: ProblemSpec, grid: Grid, sweeps: int = 5,
                   tol: float | None = None, track_residual: bool = True):
    """Run ``sweeps`` Picard iterations (fewer if ``tol`` is given and met).

    Returns ``(trajectory, diagnostics)``.
    """
    if int(sweeps) != sweeps or sweeps < 1:
        raise ValueError(f"sweeps must be an integer >= 1, got {sweeps}")
    spec.require_scheme_regime()
    traj = initial_iterate(spec, grid)
    diag = SweepDiagnostics()
    for _ in range(int(sweeps)):
        nxt = picard_sweep(traj, spec, grid)
        delta = max(float(np.abs(nxt.U - traj.U).max()), float(np.abs(nxt.V - traj.V).max()))
        if not np.isfinite(delta):
            raise SimulationError(nxt.iterate_index, grid.N - 1,
                                  FloatingPointError("non-finite state"))
        traj = nxt
        diag.sweep_deltas.append(delta)
        if track_residual:
            diag.residuals.append(nonlinear_defect(traj, spec, grid))
        if tol is not None and delta < tol:
            break
    return traj, diag
