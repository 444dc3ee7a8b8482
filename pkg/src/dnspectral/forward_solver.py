"""Series solution of the forward problem on [0,1] with time-independent source.

The field is assembled mode by mode from the projected data: the root mode
carries the nonlocal mass, the cosine modes decay, and each sine mode picks
up a convolution coupling from its cosine companion.  Time grids are graded
(t_i = T (i/nt)^4): solutions behave like t^{alpha0-1} at the origin, and the
initial-condition check needs nodes deep inside that layer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from .errors import ConfigurationError, DomainError, IncompatibleDataError
from .fde_core import ModeParams, u0_mode, u1_mode, u2_mode
from .spectral_basis import (
    SpectralCoeffs,
    eigenvalue,
    project,
    reconstruct,
)

__all__ = [
    "ForwardProblem",
    "SolutionField",
    "CompatibilityReport",
    "ForwardSolution",
    "graded_time_grid",
    "check_compatibility",
    "solve_forward",
    "evaluate",
]

TIME_GRADING = 4.0
#: mode coefficients below this share of the data scale skip their
#: convolution coupling; the skipped contribution is below solver tolerance
COUPLING_SKIP = 1e-13


def graded_time_grid(T: float, nt: int) -> np.ndarray:
    """nt positive times T*(i/nt)^4, i = 1..nt."""
    i = np.arange(1, nt + 1, dtype=float)
    return T * (i / nt) ** TIME_GRADING


@dataclass(frozen=True)
class ForwardProblem:
    alpha0: float
    alpha1: float
    T: float
    phi: object  # callable on [0, 1]
    source: object | None = None
    N: int = 32
    nx: int = 257
    nt: int = 128

    def __post_init__(self):
        for a in (self.alpha0, self.alpha1):
            if not (0.0 < a <= 1.0):
                raise DomainError(f"orders must lie in (0, 1], got {a}")
        if not (0.0 < self.rho <= 1.0):
            raise DomainError(f"total order {self.rho} outside (0, 1]")
        if not (self.T > 0.0):
            raise DomainError("horizon must be positive")
        if self.N < 1:
            raise DomainError("truncation must be >= 1")
        if self.nx < 8 or self.nt < 8:
            raise DomainError("output grids need at least 8 points")
        if self.nx < 4 * self.N:
            raise ConfigurationError(
                f"nx={self.nx} too coarse for N={self.N} modes (need nx >= 4N)"
            )

    @property
    def rho(self) -> float:
        return self.alpha0 + self.alpha1 - 1.0


@dataclass
class SolutionField:
    """u on a (t, x) tensor grid plus the regularity-weighted field t^alpha1 u."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    weighted: np.ndarray


@dataclass
class CompatibilityReport:
    value_at_right: float
    derivative_mismatch: float
    tolerance: float = 1e-6

    @property
    def value_ok(self) -> bool:
        return abs(self.value_at_right) <= self.tolerance

    @property
    def derivative_ok(self) -> bool:
        return abs(self.derivative_mismatch) <= self.tolerance

    @property
    def ok(self) -> bool:
        return self.value_ok and self.derivative_ok


@dataclass
class ForwardSolution:
    field: SolutionField
    u_coeffs: list[SpectralCoeffs]
    phi_coeffs: SpectralCoeffs
    f_coeffs: SpectralCoeffs
    tail_estimate: float
    compat: CompatibilityReport
    mode_factors: dict = field(default_factory=dict)


def check_compatibility(phi, level: int = 1) -> CompatibilityReport:
    """Finite-difference report on phi(1) = 0 and phi'(0) = phi'(1)."""
    h = 1e-6
    v1 = float(phi(1.0))
    d0 = (-3.0 * float(phi(0.0)) + 4.0 * float(phi(h)) - float(phi(2 * h))) / (2 * h)
    d1 = (3.0 * float(phi(1.0)) - 4.0 * float(phi(1.0 - h)) + float(phi(1.0 - 2 * h))) / (
        2 * h
    )
    scale = 1.0 + max(abs(float(phi(x))) for x in (0.0, 0.25, 0.5, 0.75, 1.0))
    return CompatibilityReport(
        value_at_right=v1 / scale, derivative_mismatch=(d0 - d1) / scale
    )


def _second_derivative_l2(f) -> float:
    """Numerical ||f''||_L2 used by the truncation tail estimate."""
    xs = np.linspace(0.0, 1.0, 513)
    h = xs[1] - xs[0]
    vals = np.asarray(f(xs), dtype=float)
    d2 = np.diff(vals, 2) / h**2
    return float(math.sqrt(np.sum(d2**2) * h))


def _mode_factors(
    alpha0: float,
    alpha1: float,
    t_grid: np.ndarray,
    phi_c: SpectralCoeffs,
    f_c: SpectralCoeffs,
    conv_tol: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time factors (u0, U1[k,:], U2[k,:]) on the time grid."""
    N = phi_c.N
    nt = len(t_grid)
    scale = max(
        abs(phi_c.c0),
        abs(f_c.c0),
        float(np.max(np.abs(phi_c.c1), initial=0.0)),
        float(np.max(np.abs(phi_c.c2), initial=0.0)),
        float(np.max(np.abs(f_c.c1), initial=0.0)),
        float(np.max(np.abs(f_c.c2), initial=0.0)),
        1e-300,
    )
    u0 = np.empty(nt)
    p0 = ModeParams(alpha0, alpha1, 0.0, phi_c.c0, f_c.c0)
    for i, t in enumerate(t_grid):
        u0[i] = u0_mode(p0, float(t))
    U1 = np.zeros((N, nt))
    U2 = np.zeros((N, nt))
    for k in range(1, N + 1):
        lam = eigenvalue(k)
        p1 = ModeParams(alpha0, alpha1, lam, phi_c.c1[k - 1], f_c.c1[k - 1])
        p2 = ModeParams(alpha0, alpha1, lam, phi_c.c2[k - 1], f_c.c2[k - 1])
        couple = (
            abs(phi_c.c1[k - 1]) > COUPLING_SKIP * scale
            or abs(f_c.c1[k - 1]) > COUPLING_SKIP * scale
        )
        for i, t in enumerate(t_grid):
            U1[k - 1, i] = u1_mode(p1, float(t))
            if couple:
                U2[k - 1, i] = u2_mode(
                    p2, phi_c.c1[k - 1], f_c.c1[k - 1], float(t), conv_tol
                )
            else:
                U2[k - 1, i] = u2_mode(p2, 0.0, 0.0, float(t), conv_tol)
    return u0, U1, U2


def _assemble_field(
    alpha0: float,
    alpha1: float,
    T: float,
    phi_c: SpectralCoeffs,
    f_c: SpectralCoeffs,
    nx: int,
    nt: int,
    conv_tol: float = 1e-8,
) -> tuple[SolutionField, list[SpectralCoeffs], tuple]:
    t_grid = graded_time_grid(T, nt)
    x_grid = np.linspace(0.0, 1.0, nx)
    u0, U1, U2 = _mode_factors(alpha0, alpha1, t_grid, phi_c, f_c, conv_tol)
    N = phi_c.N
    values = np.outer(u0, 2.0 * (1.0 - x_grid))
    for k in range(1, N + 1):  # fixed summation order, scheduling-independent
        w = 2.0 * math.pi * k
        x1 = 4.0 * (1.0 - x_grid) * np.cos(w * x_grid)
        x2 = 4.0 * np.sin(w * x_grid)
        values += np.outer(U1[k - 1], x1)
        values += np.outer(U2[k - 1], x2)
    weighted = (t_grid**alpha1)[:, None] * values
    field = SolutionField(t_grid=t_grid, x_grid=x_grid, values=values, weighted=weighted)
    u_coeffs = [
        SpectralCoeffs(c0=float(u0[i]), c1=U1[:, i].copy(), c2=U2[:, i].copy())
        for i in range(nt)
    ]
    return field, u_coeffs, (u0, U1, U2)


def solve_forward(
    p: ForwardProblem,
    allow_incompatible: bool = False,
    conv_tol: float = 1e-8,
) -> ForwardSolution:
    """Project the data, solve each mode in closed form, assemble the field."""
    compat = check_compatibility(p.phi)
    if not compat.ok:
        if not allow_incompatible:
            raise IncompatibleDataError(
                "initial data violates phi(1)=0 or phi'(0)=phi'(1): "
                f"residuals ({compat.value_at_right:.3e}, "
                f"{compat.derivative_mismatch:.3e})"
            )
        warnings.warn("proceeding with incompatible initial data", stacklevel=2)
    phi_c = project(p.phi, p.N)
    if p.source is not None:
        f_c = project(p.source, p.N)
        f_norm = _second_derivative_l2(p.source)
    else:
        f_c = SpectralCoeffs(0.0, np.zeros(p.N), np.zeros(p.N))
        f_norm = 0.0
    field, u_coeffs, factors = _assemble_field(
        p.alpha0, p.alpha1, p.T, phi_c, f_c, p.nx, p.nt, conv_tol
    )
    phi_norm = _second_derivative_l2(p.phi)
    # decay-lemma tail: |g_1k| + 3|g_2k| <= 4 ||g''||/k^2, members bounded by 4
    tail = 16.0 * (phi_norm + f_norm) * float(polygamma(1, p.N + 1))
    return ForwardSolution(
        field=field,
        u_coeffs=u_coeffs,
        phi_coeffs=phi_c,
        f_coeffs=f_c,
        tail_estimate=tail,
        compat=compat,
        mode_factors={"u0": factors[0], "U1": factors[1], "U2": factors[2]},
    )


def evaluate(field: SolutionField, t: float, x: float) -> float:
    """Bilinear interpolation on the stored grid; errors outside the hull."""
    tg, xg = field.t_grid, field.x_grid
    eps_t = 1e-12 * tg[-1]
    if not (tg[0] - eps_t <= t <= tg[-1] + eps_t) or not (
        -1e-12 <= x <= 1.0 + 1e-12
    ):
        raise DomainError(f"point (t={t}, x={x}) outside the stored grid hull")
    t = min(max(t, tg[0]), tg[-1])
    x = min(max(x, xg[0]), xg[-1])
    i = min(int(np.searchsorted(tg, t, side="right")) - 1, len(tg) - 2)
    i = max(i, 0)
    j = min(int(np.searchsorted(xg, x, side="right")) - 1, len(xg) - 2)
    j = max(j, 0)
    ft = (t - tg[i]) / (tg[i + 1] - tg[i])
    fx = (x - xg[j]) / (xg[j + 1] - xg[j])
    v = field.values
    return float(
        v[i, j] * (1 - ft) * (1 - fx)
        + v[i + 1, j] * ft * (1 - fx)
        + v[i, j + 1] * (1 - ft) * fx
        + v[i + 1, j + 1] * ft * fx
    )
