"""Method-of-lines discretization on a uniform grid.

Unknown layout (both blocks have length 2K)::

    u_block = [U_1 .. U_K, dU_1 .. dU_K]          (U_0 = 0 is implicit)
    v_block = [V_0 .. V_{K-1}, dV_0 .. dV_{K-1}]  (V_K = 0 is implicit)

Each field obeys ``d/dt block = A block + F`` where the stage matrix freezes
the nonlinear terms at a previous iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ProblemSpec,
    cross_coefficients,
    forcing_eval,
    initial_data_eval,
    own_sources,
    psi_r,
    source_f1,
    source_f2,
)


@dataclass(frozen=True)
class Grid:
    K: int
    N: int
    T: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError(f"K must be an integer >= 2, got {self.K}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")

    @property
    def dx(self) -> float:
        return 1.0 / self.K

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.K + 1) / self.K

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt


def build_grid(K: int, N: int, T: float) -> Grid:
    return Grid(int(K), int(N), float(T))


@dataclass
class StateVector:
    u_block: np.ndarray
    v_block: np.ndarray

    @property
    def K(self) -> int:
        return self.u_block.size // 2

    def u_nodes(self) -> np.ndarray:
        """Displacement u on the closed grid x_0..x_K."""
        return np.concatenate(([0.0], self.u_block[: self.K]))

    def v_nodes(self) -> np.ndarray:
        return np.concatenate((self.v_block[: self.K], [0.0]))

    def ut_nodes(self) -> np.ndarray:
        return np.concatenate(([0.0], self.u_block[self.K:]))

    def vt_nodes(self) -> np.ndarray:
        return np.concatenate((self.v_block[self.K:], [0.0]))

    def copy(self) -> "StateVector":
        return StateVector(self.u_block.copy(), self.v_block.copy())

    @classmethod
    def from_nodes(cls, u, ut, v, vt) -> "StateVector":
        """Build from closed-grid arrays; u[0] and v[-1] are dropped."""
        u, ut, v, vt = (np.asarray(a, dtype=float) for a in (u, ut, v, vt))
        return cls(np.concatenate((u[1:], ut[1:])), np.concatenate((v[:-1], vt[:-1])))

    @classmethod
    def zeros(cls, K: int) -> "StateVector":
        return cls(np.zeros(2 * K), np.zeros(2 * K))


@dataclass(frozen=True)
class StageSystem:
    A: np.ndarray
    B: np.ndarray
    F1_vec: np.ndarray
    F2_vec: np.ndarray
    stage_time: float

    def __post_init__(self):
        for arr in (self.A, self.B, self.F1_vec, self.F2_vec):
            arr.setflags(write=False)


def discretize_initial(spec: ProblemSpec, grid: Grid) -> StateVector:
    u0, u1, v0, v1 = initial_data_eval(spec.initial_data, grid.x)
    return StateVector.from_nodes(u0, u1, v0, v1)


def _laplacian_blocks(K: int):
    # u rows: nodes 1..K with Dirichlet at 0 and the Robin flux row at K;
    # v rows: nodes 0..K-1 with the Robin flux row at 0 and Dirichlet at K
    k2 = float(K * K)
    lap_u = k2 * (np.diag(np.full(K - 1, 1.0), 1) + np.diag(np.full(K - 1, 1.0), -1))
    lap_v = lap_u.copy()
    diag_u = np.full(K, -2 * k2)
    diag_u[-1] = -k2
    diag_v = np.full(K, -2 * k2)
    diag_v[0] = -k2
    return lap_u, diag_u, lap_v, diag_v


def _damping_diagonals(spec: ProblemSpec, K: int):
    du = np.full(K, -spec.lambda1)
    du[-1] -= spec.mu1 * K
    dv = np.full(K, -spec.lambda2)
    dv[0] -= spec.mu2 * K
    return du, dv


def semi_discrete_rhs(state: StateVector, t: float, spec: ProblemSpec, grid: Grid) -> StateVector:
    """Evaluate the nonlinear semi-discrete system directly, node by node."""
    spec.require_scheme_regime()
    K, k2 = grid.K, float(grid.K) ** 2
    x = grid.x
    u, ut = state.u_nodes(), state.ut_nodes()
    v, vt = state.v_nodes(), state.vt_nodes()
    F1, F2 = forcing_eval(spec.forcing, x, t)
    f1 = source_f1(u, v, spec.potential)
    f2 = source_f2(u, v, spec.potential)

    utt = np.zeros(K + 1)
    utt[1:K] = k2 * (u[:-2] - 2 * u[1:-1] + u[2:]) - spec.lambda1 * ut[1:K] + f1[1:K] + F1[1:K]
    utt[K] = (K * (spec.k1 * psi_r(u[K], spec.p1) - spec.mu1 * ut[K])
              - k2 * (u[K] - u[K - 1]) - spec.lambda1 * ut[K] + f1[K] + F1[K])

    vtt = np.zeros(K + 1)
    vtt[1:K] = k2 * (v[:-2] - 2 * v[1:-1] + v[2:]) - spec.lambda2 * vt[1:K] + f2[1:K] + F2[1:K]
    vtt[0] = (K * (spec.k2 * psi_r(v[0], spec.p2) - spec.mu2 * vt[0])
              + k2 * (v[1] - v[0]) - spec.lambda2 * vt[0] + f2[0] + F2[0])

    return StateVector(
        np.concatenate((ut[1:], utt[1:])),
        np.concatenate((vt[:-1], vtt[:-1])),
    )


def assemble_stage(prev: StateVector, t: float, spec: ProblemSpec, grid: Grid) -> StageSystem:
    """Linearized stage system about ``prev`` at time ``t``.

    Same-field nonlinearities (own-field sources, boundary source) are frozen
    into the F-vectors; cross-field terms keep the current unknown and move
    onto the matrix diagonal.
    """
    spec.require_scheme_regime()
    K = grid.K
    x = grid.x
    u, v = prev.u_nodes(), prev.v_nodes()
    c1, c2 = cross_coefficients(u, v, spec.potential)
    g1, g2 = own_sources(u, v, spec.potential)
    F1, F2 = forcing_eval(spec.forcing, x, t)
    lap_u, diag_u, lap_v, diag_v = _laplacian_blocks(K)
    damp_u, damp_v = _damping_diagonals(spec, K)
    eye = np.eye(K)

    # c1 vanishes at node K since V_K = 0
    A = np.zeros((2 * K, 2 * K))
    A[:K, K:] = eye
    A[K:, :K] = lap_u + np.diag(diag_u + c1[1:])
    A[K:, K:] = np.diag(damp_u)

    B = np.zeros((2 * K, 2 * K))
    B[:K, K:] = eye
    B[K:, :K] = lap_v + np.diag(diag_v + c2[:-1])
    B[K:, K:] = np.diag(damp_v)

    F1_vec = np.zeros(2 * K)
    F1_vec[K:] = g1[1:] + F1[1:]
    F1_vec[-1] += K * spec.k1 * psi_r(u[K], spec.p1)

    F2_vec = np.zeros(2 * K)
    F2_vec[K:] = g2[:-1] + F2[:-1]
    F2_vec[K] += K * spec.k2 * psi_r(v[0], spec.p2)

    return StageSystem(A, B, F1_vec, F2_vec, float(t))
