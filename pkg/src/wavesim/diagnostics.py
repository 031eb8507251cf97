"""Energy functionals, decay constants and blow-up monitors on discrete states.

Integrals over (0, 1) use one of two quadratures:

``"trapezoid"``
    composite trapezoid rule, the natural approximation of a continuous
    integral; used for reference energies and norm inequalities.
``"nodal"``
    weight ``dx`` at every node. Because the semi-discrete system has mass
    matrix ``dx * I`` in these weights, the energy built from them is an exact
    Lyapunov function of the scheme. Energy time series default to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from .discretization import Grid, StateVector, build_grid, discretize_initial
from .model import DataKind, ProblemSpec, blowup_margin, manufactured_forcing, potential_F

K_REF = 400
T_CUT = 50.0
RULES = ("trapezoid", "nodal")


def quadrature_weights(K: int, rule: str = "trapezoid") -> np.ndarray:
    if rule not in RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    w = np.full(K + 1, 1.0 / K)
    if rule == "trapezoid":
        w[[0, -1]] *= 0.5
    return w


@dataclass(frozen=True)
class DiscreteNorms:
    L2_sq: float
    grad_L2_sq: float
    La_pow_a: float | None = None


def discrete_norms(values, dx: float, alpha: float | None = None,
                   rule: str = "trapezoid") -> DiscreteNorms:
    """Squared L2 norm, squared gradient norm and optionally ``int |u|^alpha``.

    ``values`` must cover the closed grid, boundary zeros included. The
    gradient uses forward differences over the K cells.
    """
    u = np.asarray(values, dtype=float)
    K = u.size - 1
    if not np.isclose(K * dx, 1.0):
        raise ValueError(f"{u.size} values do not match dx = {dx}")
    w = quadrature_weights(K, rule)
    la = float(w @ np.abs(u) ** alpha) if alpha is not None else None
    return DiscreteNorms(float(w @ u**2), float((np.diff(u) ** 2).sum() / dx), la)


@dataclass(frozen=True)
class BlowupParams:
    xi: float
    epsilon: float = 1e-3
    C_bar: float | None = None

    def __post_init__(self):
        if not 0 < self.xi <= 0.5:
            raise ValueError(f"xi must lie in (0, 1/2], got {self.xi}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.C_bar is not None and not self.C_bar > 0:
            raise ValueError(f"C_bar must be > 0, got {self.C_bar}")

    @staticmethod
    def xi_max(spec: ProblemSpec) -> float:
        p = spec.potential
        if p is None:
            return 0.5
        return min((p.alpha - 2) / (2 * p.alpha), (p.beta - 2) / (2 * p.beta))

    @classmethod
    def default(cls, spec: ProblemSpec, epsilon: float = 1e-3,
                C_bar: float | None = None) -> "BlowupParams":
        return cls(0.5 * cls.xi_max(spec), epsilon, C_bar)

    def validate_for(self, spec: ProblemSpec) -> None:
        if self.xi > self.xi_max(spec):
            raise ValueError(f"xi = {self.xi} exceeds its admissible maximum {self.xi_max(spec)}")


def default_delta(spec: ProblemSpec) -> float:
    return 0.25 * (1 - 1 / spec.p1 - 1 / spec.p2)


@dataclass(frozen=True)
class EnergySample:
    t: float
    E: float
    H: float
    I1: float
    I2: float
    J: float
    psi: float
    L_blowup: float | None
    Lyap: float
    kinetic: float
    potential_grad: float
    boundary_terms: float
    source_integral: float


def energy_sample(state: StateVector, t: float, spec: ProblemSpec, grid: Grid,
                  blowup: BlowupParams | None = None, delta: float | None = None,
                  rule: str = "nodal") -> EnergySample:
    if blowup is None:
        blowup = BlowupParams.default(spec)
    if delta is None:
        delta = default_delta(spec)
    w = quadrature_weights(grid.K, rule)
    u, ut = state.u_nodes(), state.ut_nodes()
    v, vt = state.v_nodes(), state.vt_nodes()
    u1, v0 = u[-1], v[0]

    kinetic = 0.5 * float(w @ (ut**2 + vt**2))
    grad = float(((np.diff(u) ** 2).sum() + (np.diff(v) ** 2).sum()) / grid.dx)
    bnd_u = spec.k1 * abs(u1) ** spec.p1
    bnd_v = spec.k2 * abs(v0) ** spec.p2
    boundary = bnd_u / spec.p1 + bnd_v / spec.p2
    source = float(w @ potential_F(u, v, spec.potential))

    E = kinetic + 0.5 * grad - boundary - source
    I1 = 0.5 * grad - bnd_u - 0.5 * spec.p1 * source
    I2 = 0.5 * grad - bnd_v - 0.5 * spec.p2 * source
    J = 0.5 * (1 - 1 / spec.p1 - 1 / spec.p2) * grad + I1 / spec.p1 + I2 / spec.p2
    psi = (float(w @ (u * ut + v * vt))
           + 0.5 * spec.lambda1 * float(w @ u**2) + 0.5 * spec.lambda2 * float(w @ v**2)
           + 0.5 * spec.mu1 * u1**2 + 0.5 * spec.mu2 * v0**2)
    H = 0.0 - E  # avoids a signed zero in reports
    L = H ** (1 - blowup.xi) + blowup.epsilon * psi if H > 0 else None
    return EnergySample(float(t), E, H, I1, I2, J, psi, L, E + delta * psi,
                        kinetic, 0.5 * grad, boundary, source)


def energy_series(traj, spec: ProblemSpec, grid: Grid, blowup: BlowupParams | None = None,
                  delta: float | None = None, rule: str = "nodal") -> list[EnergySample]:
    return [energy_sample(traj.state(n), grid.t[n], spec, grid, blowup, delta, rule)
            for n in range(len(traj))]


def initial_energy(spec: ProblemSpec, K_ref: int = K_REF) -> float:
    """E(0) on a refined grid with trapezoid quadrature."""
    g = build_grid(K_ref, 1, 1.0)
    return energy_sample(discretize_initial(spec, g), 0.0, spec, g, rule="trapezoid").E


# --- decay constants -------------------------------------------------------

def _forcing_norm_sum(t: float, nodes: np.ndarray, weights: np.ndarray) -> float:
    F1, F2 = manufactured_forcing(nodes, t)
    return math.sqrt(weights @ F1**2) + math.sqrt(weights @ F2**2)


def _tail_majorant(t0: float) -> float:
    # integral over (t0, inf) of sqrt(1682/105 * exp(-27/2 - 6s)), an upper
    # bound for ||F1|| + ||F2|| over 2
    return math.sqrt(1682 / 105) * math.exp(-6.75 - 3 * t0) / 3


def forcing_rho(kind: DataKind, t_cut: float = T_CUT) -> float:
    """Half the time integral of ``||F1|| + ||F2||`` over (0, inf)."""
    if kind.factor == 0:
        return 0.0
    x, wx = roots_legendre(8)
    nodes, weights = 0.5 * (x + 1), 0.5 * wx
    # the forcing decays on a scale of 1/3, so split the range to keep quad honest
    edges = np.concatenate((np.arange(0.0, min(t_cut, 10.0), 1.0), [t_cut]))
    body = sum(integrate.quad(_forcing_norm_sum, a, b, args=(nodes, weights),
                              epsabs=1e-15, epsrel=1e-12)[0]
               for a, b in zip(edges[:-1], edges[1:]))
    return abs(kind.factor) * (0.5 * body + _tail_majorant(t_cut))


@dataclass(frozen=True)
class DecayConstants:
    rho: float
    E0: float
    E_star: float
    p_star: float
    eta_star: float

    @property
    def hypothesis_ok(self) -> bool:
        return self.eta_star < 1


def p_star(p1: float, p2: float) -> float:
    denom = p1 * p2 - p1 - p2
    if denom <= 0:
        raise ValueError(f"p1*p2 must exceed p1 + p2, got p1 = {p1}, p2 = {p2}")
    return 2 * p1 * p2 / denom


def decay_constants(spec: ProblemSpec, E0: float | None = None) -> DecayConstants:
    ps = p_star(spec.p1, spec.p2)
    if E0 is None:
        E0 = initial_energy(spec)
    rho = forcing_rho(spec.forcing)
    E_star = (E0 + rho) * math.exp(2 * rho)
    z = ps * E_star
    if z < 0:
        raise ValueError(f"p_star * E_star = {z} is negative; decay hypotheses do not apply")
    eta = spec.k1 * z ** (spec.p1 / 2 - 1) + spec.k2 * z ** (spec.p2 / 2 - 1)
    pot = spec.potential
    if pot is not None:
        eta += 0.5 * (spec.p1 + spec.p2) * pot.dbar2 * (z ** (pot.alpha / 2 - 1) + z ** (pot.beta / 2 - 1))
    return DecayConstants(rho, E0, E_star, ps, eta)


def equivalence_constants(spec: ProblemSpec, delta: float) -> tuple[float, float]:
    """Bounds (beta1, beta2) with beta1 E <= E + delta psi <= beta2 E."""
    c = 1 - 1 / spec.p1 - 1 / spec.p2
    damping = spec.lambda1 + spec.lambda2 + spec.mu1 + spec.mu2
    return min(1 - delta, 1 - delta / c), max(1 + delta, 1 + delta * (1 + damping) / c)


def fit_decay_rate(samples: Sequence[EnergySample], window: tuple[float, float]):
    """Least-squares fit ``E ~ C exp(-gamma t)`` over samples inside ``window``.

    Returns ``(C, gamma, residual)`` where ``residual`` is the largest
    deviation in log space.
    """
    lo, hi = window
    pts = [(s.t, s.E) for s in samples if lo <= s.t <= hi]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 samples in [{lo}, {hi}], got {len(pts)}")
    t, E = np.array(pts).T
    if np.any(E <= 0):
        raise ValueError("energy must be positive throughout the fit window")
    slope, intercept = np.polyfit(t, np.log(E), 1)
    resid = float(np.abs(np.log(E) - (slope * t + intercept)).max())
    return math.exp(intercept), -float(slope), resid


# --- blow-up ---------------------------------------------------------------

def blowup_time_bound(L0: float, params: BlowupParams) -> float | None:
    if not L0 > 0:
        raise ValueError(f"L0 must be > 0, got {L0}")
    if params.C_bar is None:
        return None
    xi = params.xi
    return (1 - xi) / (params.C_bar * xi) * L0 ** (-xi / (1 - xi))


def nondecreasing_violations(values: Sequence[float], rtol: float = 1e-6) -> list[int]:
    """Steps n where ``values[n+1] < values[n] - rtol * (1 + |values[n]|)``."""
    a = np.asarray(values, dtype=float)
    drop = a[1:] - a[:-1] + rtol * (1 + np.abs(a[:-1]))
    return [int(i) for i in np.nonzero(drop < 0)[0]]


@dataclass(frozen=True)
class BlowupScan:
    scale: float | None
    E0: float | None
    margin: float
    tried: tuple[float, ...]

    @property
    def admissible(self) -> bool:
        return self.scale is not None


def scan_blowup_scale(spec: ProblemSpec, grid: Grid, scales: Sequence[float]) -> BlowupScan:
    """First scale of the manufactured data giving negative initial energy.

    The energy is evaluated on ``grid`` itself so the monitored run starts
    exactly where the scan found H(0) > 0.
    """
    margin = blowup_margin(spec)
    if not margin > 0:
        return BlowupScan(None, None, margin, ())
    tried = []
    for s in scales:
        tried.append(float(s))
        trial = replace(spec, initial_data=DataKind.scaled(s))
        E0 = energy_sample(discretize_initial(trial, grid), 0.0, trial, grid).E
        if E0 < 0:
            return BlowupScan(float(s), E0, margin, tuple(tried))
    return BlowupScan(None, None, margin, tuple(tried))


# --- norm inequality -------------------------------------------------------

@dataclass(frozen=True)
class InterpolationCheck:
    ok: bool
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def check_lemma13(values, dx: float, xi: float, alpha: float, p_bnd: float,
                  side: str = "left", rule: str = "trapezoid") -> InterpolationCheck:
    """Check the interpolation bound for a grid function vanishing at one end.

    ``side="left"`` means the function vanishes at x = 0 and the trace is
    read at x = 1; ``"right"`` is the mirror case.
    """
    a_exp, b_exp = 2 / (1 - 2 * xi), 2 / (1 - xi)
    if not (0 < xi < 0.5 and a_exp <= alpha and b_exp <= min(alpha, p_bnd)):
        raise ValueError(f"xi = {xi} is outside the admissible range for alpha = {alpha}, p = {p_bnd}")
    u = np.asarray(values, dtype=float)
    if side == "left":
        zero_end, trace = u[0], u[-1]
    elif side == "right":
        zero_end, trace = u[-1], u[0]
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if zero_end != 0:
        raise ValueError(f"values must vanish at the {side} end")
    n = discrete_norms(u, dx, alpha, rule)
    la_norm = n.La_pow_a ** (1 / alpha)
    lhs = la_norm**a_exp + n.L2_sq ** (b_exp / 2) + abs(trace) ** b_exp
    rhs = 3 * (n.grad_L2_sq + n.La_pow_a + abs(trace) ** p_bnd)
    return InterpolationCheck(bool(lhs <= rhs), float(lhs), float(rhs))
