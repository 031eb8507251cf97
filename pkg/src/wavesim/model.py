"""Continuous problem definition for the coupled damped wave system.

    u_tt - u_xx + lambda1 |u_t|^{r1-2} u_t = f1(u, v) + F1(x, t)
    v_tt - v_xx + lambda2 |v_t|^{r2-2} v_t = f2(u, v) + F2(x, t)

on (0, 1) with u(0, t) = 0, v(1, t) = 0 and nonlinear Robin conditions

    -u_x(1) + k1 psi_p1(u(1)) = mu1 psi_q1(u_t(1))
     v_x(0) + k2 psi_p2(v(0)) = mu2 psi_q2(v_t(0))

The interior sources derive from the potential

    F(u, v) = gamma1 (|u|^alpha + |v|^beta) + gamma2 |u|^{alpha/2} |v|^{beta/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MANUFACTURED = "manufactured"
ZERO = "zero"
SCALED = "scaled"

# stencil for one-sided derivatives when a data kind has no closed form
COMPAT_STENCIL = 1e-4


def psi_r(z, r: float):
    """Odd power map ``|z|^(r-2) z``."""
    if r < 2:
        raise ValueError(f"exponent r must be >= 2, got {r}")
    z = np.asarray(z, dtype=float)
    if r == 2:
        out = z.copy()
    else:
        out = np.abs(z) ** (r - 2) * z
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialParams:
    alpha: float = 4.0
    beta: float = 4.0
    gamma1: float = 0.75
    gamma2: float = 0.5

    def __post_init__(self):
        if not (self.alpha > 2 and self.beta > 2):
            raise ValueError("alpha and beta must be > 2")
        if not self.gamma1 > 0:
            raise ValueError("gamma1 must be > 0")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be >= 0")
        if not self.gamma2 < 2 * self.gamma1:
            raise ValueError("gamma2 must be < 2*gamma1")
        if self.gamma2 > 0 and (self.alpha < 4 or self.beta < 4):
            # |u|^{alpha/2-2} is singular at u = 0 otherwise
            raise ValueError("alpha and beta must be >= 4 when gamma2 > 0")

    @property
    def d1(self) -> float:
        return min(self.alpha, self.beta)

    @property
    def d2(self) -> float:
        return max(self.alpha, self.beta)

    @property
    def dbar1(self) -> float:
        return self.gamma1 - self.gamma2 / 2

    @property
    def dbar2(self) -> float:
        return self.gamma1 + self.gamma2 / 2


@dataclass(frozen=True)
class DataKind:
    """Tagged choice of built-in forcing or initial data.

    ``kind`` is one of ``"zero"``, ``"manufactured"``, ``"scaled"``; only the
    scaled kind reads ``scale``.
    """

    kind: str = MANUFACTURED
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (ZERO, MANUFACTURED, SCALED):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if not math.isfinite(self.scale):
            raise ValueError("scale must be finite")

    @classmethod
    def zero(cls):
        return cls(ZERO, 0.0)

    @classmethod
    def manufactured(cls):
        return cls(MANUFACTURED, 1.0)

    @classmethod
    def scaled(cls, scale: float):
        return cls(SCALED, float(scale))

    @property
    def factor(self) -> float:
        if self.kind == ZERO:
            return 0.0
        if self.kind == MANUFACTURED:
            return 1.0
        return self.scale

    @classmethod
    def parse(cls, text: str) -> "DataKind":
        """Parse ``zero``, ``manufactured`` or ``scaled:<real>``."""
        text = text.strip().lower()
        if text == ZERO:
            return cls.zero()
        if text == MANUFACTURED:
            return cls.manufactured()
        if text.startswith(SCALED + ":"):
            return cls.scaled(float(text.split(":", 1)[1]))
        raise ValueError(f"expected zero | manufactured | scaled:<real>, got {text!r}")

    def __str__(self):
        if self.kind == SCALED:
            return f"{SCALED}:{self.scale!r}"
        return self.kind


# the two data families share one representation
ForcingKind = DataKind
InitialDataKind = DataKind


@dataclass(frozen=True)
class ProblemSpec:
    """All parameters of the continuous problem.

    ``potential=None`` switches the interior sources off entirely, and the
    boundary stiffnesses may be 0; both are used for purely dissipative runs.
    """

    lambda1: float = 1.0
    lambda2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    k1: float = 1.0
    k2: float = 1.0
    p1: float = 6.0
    p2: float = 6.0
    q1: float = 2.0
    q2: float = 2.0
    r1: float = 2.0
    r2: float = 2.0
    potential: PotentialParams | None = field(default_factory=PotentialParams)
    forcing: DataKind = field(default_factory=DataKind.manufactured)
    initial_data: DataKind = field(default_factory=DataKind.manufactured)
    horizon: float = 20.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "mu1", "mu2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("k1", "k2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("p1", "p2", "q1", "q2", "r1", "r2"):
            if not getattr(self, name) >= 2:
                raise ValueError(f"{name} must be ≥ 2")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")

    @property
    def linear_damping(self) -> bool:
        return self.r1 == self.r2 == self.q1 == self.q2 == 2

    def require_scheme_regime(self):
        if not self.linear_damping:
            raise ValueError("the discrete scheme needs r1 = r2 = q1 = q2 = 2")


def example_spec(**overrides) -> ProblemSpec:
    """The worked example: alpha = beta = 4, p = 6, unit coefficients, T = 20."""
    return ProblemSpec(**overrides)


# ---------------------------------------------------------------------------
# potential and sources


def potential_F(u, v, p: PotentialParams | None):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p is None:
        return np.zeros(np.broadcast(u, v).shape)
    au, av = np.abs(u), np.abs(v)
    return (p.gamma1 * (au**p.alpha + av**p.beta)
            + p.gamma2 * au ** (p.alpha / 2) * av ** (p.beta / 2))


def _mixed_factor(w, exponent):
    # |w|^exponent * w, continuous extension 0 at w = 0
    w = np.asarray(w, dtype=float)
    aw = np.abs(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(aw > 0, aw ** exponent * w, 0.0)
    return out


def source_f1(u, v, p: PotentialParams | None):
    """dF/du: alpha (gamma1 |u|^(alpha-2) + gamma2/2 |u|^(alpha/2-2) |v|^(beta/2)) u."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p is None:
        return np.zeros(np.broadcast(u, v).shape)
    own = p.gamma1 * np.abs(u) ** (p.alpha - 2) * u
    mixed = 0.5 * p.gamma2 * _mixed_factor(u, p.alpha / 2 - 2) * np.abs(v) ** (p.beta / 2)
    return p.alpha * (own + mixed)


def source_f2(u, v, p: PotentialParams | None):
    """dF/dv, the mirror of :func:`source_f1`."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p is None:
        return np.zeros(np.broadcast(u, v).shape)
    own = p.gamma1 * np.abs(v) ** (p.beta - 2) * v
    mixed = 0.5 * p.gamma2 * np.abs(u) ** (p.alpha / 2) * _mixed_factor(v, p.beta / 2 - 2)
    return p.beta * (own + mixed)


def cross_coefficients(u, v, p: PotentialParams | None):
    """Split the mixed source terms as ``c1 * u`` and ``c2 * v``.

    ``f1 = alpha gamma1 |u|^(alpha-2) u + c1 u`` and likewise for ``f2``; the
    scheme puts ``c1``, ``c2`` on the matrix diagonal.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p is None or p.gamma2 == 0:
        z = np.zeros(np.broadcast(u, v).shape)
        return z, z.copy()
    half = 0.5 * p.gamma2
    # exponents are >= 0 here (alpha, beta >= 4), and 0.0**0 == 1
    pu = np.abs(u) ** (p.alpha / 2 - 2)
    pv = np.abs(v) ** (p.beta / 2 - 2)
    c1 = p.alpha * half * pu * np.abs(v) ** (p.beta / 2)
    c2 = p.beta * half * pv * np.abs(u) ** (p.alpha / 2)
    return c1, c2


def own_sources(u, v, p: PotentialParams | None):
    """Same-field parts of the sources, ``f - cross * field``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p is None:
        z = np.zeros(np.broadcast(u, v).shape)
        return z, z.copy()
    g1 = p.alpha * p.gamma1 * np.abs(u) ** (p.alpha - 2) * u
    g2 = p.beta * p.gamma1 * np.abs(v) ** (p.beta - 2) * v
    return g1, g2


# ---------------------------------------------------------------------------
# manufactured family


def _decay(t):
    # (e^{9+4t} + 1)
    return np.exp(9.0 + 4.0 * np.asarray(t, dtype=float)) + 1.0


def exact_profile(t):
    """Amplitude ``(e^{9+4t}+1)^{-1/4}`` shared by both exact fields."""
    return _decay(t) ** -0.25


def manufactured_forcing(x, t):
    x = np.asarray(x, dtype=float)
    e = np.exp(9.0 + 4.0 * np.asarray(t, dtype=float))
    a = e + 1.0
    f1 = -(4 * x**3 - 2 * x**2 + x) / a**0.75 - 5 * e * x / a**2.25
    f2 = (x - 1) * (4 * x**2 - 6 * x + 3) / a**0.75 - 5 * e * (1 - x) / a**2.25
    return f1, f2


def forcing_eval(kind: DataKind, x, t):
    """Return ``(F1, F2)`` at ``(x, t)``; broadcasts over arrays."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if kind.kind == ZERO:
        z = np.zeros(np.broadcast(x, t).shape)
        return z, z.copy()
    f1, f2 = manufactured_forcing(x, t)
    if kind.kind == SCALED:
        f1, f2 = kind.scale * f1, kind.scale * f2
    return f1, f2


def initial_data_eval(kind: DataKind, x):
    """Return ``(u0, u1, v0, v1)`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if kind.kind == ZERO:
        z = np.zeros(x.shape)
        return z, z.copy(), z.copy(), z.copy()
    a = math.exp(9.0) + 1.0
    c = a**-0.25
    w = math.exp(9.0) * a**-1.25
    u0, u1 = x * c, -x * w
    v0, v1 = (1 - x) * c, (x - 1) * w
    if kind.kind == SCALED:
        s = kind.scale
        u0, u1, v0, v1 = s * u0, s * u1, s * v0, s * v1
    return u0, u1, v0, v1


def initial_slope(kind: DataKind):
    """Closed-form ``(u0'(1), v0'(0))`` for the built-in kinds."""
    c = (math.exp(9.0) + 1.0) ** -0.25
    return kind.factor * c, -kind.factor * c


def one_sided_slope(f, x0: float, h: float = COMPAT_STENCIL, side: str = "left") -> float:
    """Second-order one-sided derivative from three samples."""
    if side == "left":
        return (3 * f(x0) - 4 * f(x0 - h) + f(x0 - 2 * h)) / (2 * h)
    return (-3 * f(x0) + 4 * f(x0 + h) - f(x0 + 2 * h)) / (2 * h)


# ---------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisReport:
    d1: float
    d2: float
    dbar1: float
    dbar2: float
    compat_residual_u: float
    compat_residual_v: float
    a3bis_ok: bool
    d2_lt_min_p: bool
    blowup_condition: bool
    blowup_margin: float = float("nan")
    notes: str = ""


def blowup_margin(spec: ProblemSpec) -> float:
    """``min{k1, k2, d1 dbar1} - 2 max{k1/p1, k2/p2, dbar2}``."""
    p = spec.potential
    if p is None:
        d1dbar1, dbar2 = 0.0, 0.0
    else:
        d1dbar1, dbar2 = p.d1 * p.dbar1, p.dbar2
    lower = min(spec.k1, spec.k2, d1dbar1)
    upper = 2 * max(spec.k1 / spec.p1, spec.k2 / spec.p2, dbar2)
    return lower - upper


def compatibility_residuals(spec: ProblemSpec, closed_form: bool = True):
    kind = spec.initial_data
    u0_1, u1_1, _, _ = (float(a) for a in initial_data_eval(kind, 1.0))
    _, _, v0_0, v1_0 = (float(a) for a in initial_data_eval(kind, 0.0))
    if closed_form:
        du, dv = initial_slope(kind)
    else:
        du = one_sided_slope(lambda s: float(initial_data_eval(kind, s)[0]), 1.0, side="left")
        dv = one_sided_slope(lambda s: float(initial_data_eval(kind, s)[2]), 0.0, side="right")
    ru = -du + spec.k1 * psi_r(u0_1, spec.p1) - spec.mu1 * psi_r(u1_1, spec.q1)
    rv = dv + spec.k2 * psi_r(v0_0, spec.p2) - spec.mu2 * psi_r(v1_0, spec.q2)
    return abs(ru), abs(rv)


def check_hypotheses(spec: ProblemSpec) -> HypothesisReport:
    """Evaluate the structural constants and the compatibility residuals.

    Failed hypotheses are reported, never raised.
    """
    notes = []
    p = spec.potential
    if p is None:
        d1 = d2 = dbar1 = dbar2 = 0.0
        a3bis = False
        notes.append("interior sources disabled")
    else:
        d1, d2, dbar1, dbar2 = p.d1, p.d2, p.dbar1, p.dbar2
        a3bis = p.gamma2 < 2 * p.gamma1
    ru, rv = compatibility_residuals(spec)
    d2_ok = p is not None and d2 < min(spec.p1, spec.p2)
    margin = blowup_margin(spec)
    if not spec.linear_damping:
        notes.append("nonlinear damping: outside the discrete scheme's regime")
    if not d2_ok:
        notes.append("d2 < min(p1, p2) fails")
    return HypothesisReport(
        d1=d1, d2=d2, dbar1=dbar1, dbar2=dbar2,
        compat_residual_u=ru, compat_residual_v=rv,
        a3bis_ok=a3bis, d2_lt_min_p=d2_ok,
        blowup_condition=margin > 0,
        blowup_margin=margin,
        notes="; ".join(notes),
    )
