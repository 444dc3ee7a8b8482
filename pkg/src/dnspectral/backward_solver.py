"""Source recovery from initial and terminal data, with ill-posedness diagnostics.

Each mode's source coefficient comes from inverting its closed-form terminal
value; the divisor e_{rho,alpha0+alpha1}(T, lam_k) decays like 1/lam_k, so
terminal-data perturbations in mode k are amplified by about lam_k.  The sine
family is recovered last because its terminal value contains the convolution
coupling against the already-recovered cosine-family source.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHorizonError, DomainError, IncompatibleDataError
from .fde_core import ModeParams, u1_mode
from .forward_solver import (
    ForwardProblem,
    SolutionField,
    _assemble_field,
    check_compatibility,
)
from .spectral_basis import SpectralCoeffs, eigenvalue, project, reconstruct
from .special_functions import MLTFSpec, gamma, mltf_convolve, mltf_eval

__all__ = [
    "BackwardProblem",
    "PsiCompatibilityReport",
    "SourceRecovery",
    "check_psi_compatibility",
    "recover_source",
    "amplification_factor",
]

_DEN_FLOOR = 1e-300


@dataclass(frozen=True)
class BackwardProblem:
    alpha0: float
    alpha1: float
    T: float
    phi: object | None  # callable on [0,1]; None means zero initial data
    psi: object  # terminal observation on [0,1]
    N: int = 32
    nx: int = 257
    nt: int = 128

    def __post_init__(self):
        # reuse the forward-problem validation rules
        ForwardProblem(
            alpha0=self.alpha0,
            alpha1=self.alpha1,
            T=self.T,
            phi=self.psi,
            N=self.N,
            nx=self.nx,
            nt=self.nt,
        )

    @property
    def rho(self) -> float:
        return self.alpha0 + self.alpha1 - 1.0


@dataclass
class PsiCompatibilityReport:
    """Residuals of the five terminal-data conditions, finite differences."""

    value_at_right: float
    derivative_mismatch: float
    second_derivative_at_right: float
    third_derivative_mismatch: float
    fourth_difference_bound: float
    tolerance: float = 1e-6

    @property
    def conditions(self) -> dict:
        return {
            "psi(1)=0": abs(self.value_at_right) <= self.tolerance,
            "psi'(0)=psi'(1)": abs(self.derivative_mismatch) <= self.tolerance,
            "psi''(1)=0": abs(self.second_derivative_at_right) <= self.tolerance,
            "psi'''(0)=psi'''(1)": abs(self.third_derivative_mismatch)
            <= self.tolerance,
            "psi in C4": math.isfinite(self.fourth_difference_bound),
        }

    @property
    def ok(self) -> bool:
        return all(self.conditions.values())


@dataclass
class SourceRecovery:
    f_coeffs: SpectralCoeffs
    f_grid: np.ndarray
    u_field: SolutionField
    amplification: np.ndarray
    report: dict = field(default_factory=dict)


def check_psi_compatibility(psi) -> PsiCompatibilityReport:
    """Report on psi(1)=0, psi'(0)=psi'(1), psi''(1)=0, psi'''(0)=psi'''(1),
    and bounded fourth differences."""
    h1 = 1e-6
    v1 = float(psi(1.0))
    d0 = (-3.0 * float(psi(0.0)) + 4.0 * float(psi(h1)) - float(psi(2 * h1))) / (
        2 * h1
    )
    d1 = (
        3.0 * float(psi(1.0)) - 4.0 * float(psi(1.0 - h1)) + float(psi(1.0 - 2 * h1))
    ) / (2 * h1)
    h2 = 1e-4
    dd1 = (
        2.0 * float(psi(1.0))
        - 5.0 * float(psi(1.0 - h2))
        + 4.0 * float(psi(1.0 - 2 * h2))
        - float(psi(1.0 - 3 * h2))
    ) / h2**2
    h3 = 2e-3

    def third(x0, sgn):
        pts = [float(psi(x0 + sgn * i * h3)) for i in range(5)]
        # one-sided third derivative, second order
        return sgn * (
            -2.5 * pts[0] + 9.0 * pts[1] - 12.0 * pts[2] + 7.0 * pts[3] - 1.5 * pts[4]
        ) / h3**3

    t0 = third(0.0, +1.0)
    t1 = third(1.0, -1.0)
    xs = np.linspace(0.0, 1.0, 101)
    h4 = xs[1] - xs[0]
    vals = np.asarray(psi(xs), dtype=float)
    d4 = np.diff(vals, 4) / h4**4
    scale = 1.0 + float(np.max(np.abs(vals)))
    return PsiCompatibilityReport(
        value_at_right=v1 / scale,
        derivative_mismatch=(d0 - d1) / scale,
        second_derivative_at_right=dd1 / scale,
        third_derivative_mismatch=(t0 - t1) / scale,
        fourth_difference_bound=float(np.max(np.abs(d4))),
    )


def _denominator(rho: float, beta: float, lam: float, T: float) -> float:
    den = mltf_eval(MLTFSpec(rho, beta, lam), T)
    if not (den > _DEN_FLOOR):
        raise DegenerateHorizonError(
            f"recovery divisor underflowed at lam={lam}, T={T}"
        )
    return den


def amplification_factor(p: BackwardProblem, k: int) -> float:
    """1/e_{rho,alpha0+alpha1}(T, lam_k): terminal-perturbation gain of mode k."""
    if k < 1:
        raise DomainError("mode index must be >= 1")
    return 1.0 / _denominator(
        p.rho, p.alpha0 + p.alpha1, eigenvalue(k), p.T
    )


def recover_source(
    p: BackwardProblem,
    cutoff_amplification: float | None = None,
    allow_incompatible: bool = True,
    conv_tol: float = 1e-8,
) -> SourceRecovery:
    """Invert the terminal map mode by mode and rebuild f and the field.

    The optional amplification cutoff zeroes recovered coefficients in modes
    whose gain exceeds the threshold; that regularization is a practical
    extension, not part of the exact-data inversion.
    """
    compat = check_psi_compatibility(p.psi)
    if not compat.ok:
        if not allow_incompatible:
            raise IncompatibleDataError(
                f"terminal data violates compatibility: {compat.conditions}"
            )
        warnings.warn(
            "terminal data fails a compatibility condition; recovery may lose "
            "accuracy at high modes",
            stacklevel=2,
        )
    rho = p.rho
    beta = p.alpha0 + p.alpha1
    T = p.T
    psi_c = project(p.psi, p.N)
    if p.phi is not None:
        phi_c = project(p.phi, p.N)
    else:
        phi_c = SpectralCoeffs(0.0, np.zeros(p.N), np.zeros(p.N))

    # root mode: f0 = Gamma(a0+a1)/T^{a0+a1-1} (psi0 - phi0 T^{a0-1}/Gamma(a0))
    f0 = (
        gamma(beta)
        / T ** (beta - 1.0)
        * (psi_c.c0 - phi_c.c0 * T ** (p.alpha0 - 1.0) / gamma(p.alpha0))
    )

    f1 = np.zeros(p.N)
    f2 = np.zeros(p.N)
    amplification = np.zeros(p.N)
    scale = max(
        abs(psi_c.c0),
        abs(phi_c.c0),
        float(np.max(np.abs(psi_c.c1), initial=0.0)),
        float(np.max(np.abs(psi_c.c2), initial=0.0)),
        float(np.max(np.abs(phi_c.c1), initial=0.0)),
        float(np.max(np.abs(phi_c.c2), initial=0.0)),
        1e-300,
    )
    for k in range(1, p.N + 1):
        lam = eigenvalue(k)
        den = _denominator(rho, beta, lam, T)
        amplification[k - 1] = 1.0 / den
        decay = mltf_eval(MLTFSpec(rho, p.alpha0, lam), T)
        f1[k - 1] = (psi_c.c1[k - 1] - phi_c.c1[k - 1] * decay) / den
        # the sine-family recovery needs u1k built from the cosine-family
        # source just recovered, convolved against e_{rho,rho}
        coupling = 0.0
        if (
            abs(phi_c.c1[k - 1]) > 1e-13 * scale
            or abs(f1[k - 1]) > 1e-13 * scale * max(1.0, amplification[k - 1])
        ):
            conv_phi = mltf_convolve(
                MLTFSpec(rho, rho, lam), MLTFSpec(rho, p.alpha0, lam), T, conv_tol
            )
            conv_f = mltf_convolve(
                MLTFSpec(rho, rho, lam), MLTFSpec(rho, beta, lam), T, conv_tol
            )
            coupling = 2.0 * math.sqrt(lam) * (
                phi_c.c1[k - 1] * conv_phi + f1[k - 1] * conv_f
            )
        f2[k - 1] = (
            psi_c.c2[k - 1] - coupling - phi_c.c2[k - 1] * decay
        ) / den

    dropped = []
    if cutoff_amplification is not None:
        for k in range(1, p.N + 1):
            if amplification[k - 1] > cutoff_amplification:
                f1[k - 1] = 0.0
                f2[k - 1] = 0.0
                dropped.append(k)

    f_coeffs = SpectralCoeffs(c0=f0, c1=f1, c2=f2)
    x_grid = np.linspace(0.0, 1.0, p.nx)
    f_grid = np.asarray(reconstruct(f_coeffs, x_grid), dtype=float)
    u_field, u_coeffs, _ = _assemble_field(
        p.alpha0, p.alpha1, T, phi_c, f_coeffs, p.nx, p.nt, conv_tol
    )
    u_coeffs_at_T = u_coeffs[-1]

    # defining property: the recovered pair reproduces psi at T
    psi_grid = np.asarray(p.psi(x_grid), dtype=float)
    resid = u_field.values[-1] - psi_grid
    rt_l2 = float(math.sqrt(np.mean(resid**2)))
    psi_l2 = float(math.sqrt(np.mean(psi_grid**2)))
    report = {
        "roundtrip_l2": rt_l2,
        "roundtrip_l2_rel": rt_l2 / psi_l2 if psi_l2 > 0 else rt_l2,
        "max_amplification": float(np.max(amplification, initial=0.0)),
        "dropped_modes": dropped,
        "psi_compat": compat,
        "u_coeffs_at_T": u_coeffs_at_T,
    }
    return SourceRecovery(
        f_coeffs=f_coeffs,
        f_grid=f_grid,
        u_field=u_field,
        amplification=amplification,
        report=report,
    )
