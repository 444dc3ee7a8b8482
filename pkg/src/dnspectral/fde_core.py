"""Closed-form solutions of the per-mode time equations (single composite order).

Mode 0 (root):    D u0 = f0
Mode 1 (cosine):  D u1 + lam u1 = f1
Mode 2 (sine):    D u2 + lam u2 = f2 + 2 sqrt(lam) u1

with initial data J^{1-alpha0} u(0+) = phi.  The solutions are combinations
of the kernels e_{rho,beta}(t, lam) with rho = alpha0 + alpha1 - 1; the mode-2
coupling enters through a Laplace convolution against e_{rho,rho}, expanded
over u1's two kernel terms so that only kernel-pair convolutions occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fractional_ops import DNMultiOrder, dn_apply
from .special_functions import MLTFSpec, gamma, mltf_convolve, mltf_eval

__all__ = ["ModeParams", "u0_mode", "u1_mode", "u2_mode", "mode_residual"]


@dataclass(frozen=True)
class ModeParams:
    """Orders, spectral parameter, and data coefficients of one mode."""

    alpha0: float
    alpha1: float
    lam: float
    phi_coeff: float
    f_coeff: float

    def __post_init__(self):
        for a in (self.alpha0, self.alpha1):
            if not (0.0 < a <= 1.0):
                raise DomainError(f"orders must lie in (0, 1], got {a}")
        if not (0.0 < self.rho <= 1.0):
            raise DomainError(f"total order {self.rho} outside (0, 1]")
        if self.lam < 0.0:
            raise DomainError("spectral parameter must be >= 0")

    @property
    def rho(self) -> float:
        return self.alpha0 + self.alpha1 - 1.0


def u0_mode(p: ModeParams, t: float) -> float:
    """Root-mode factor: phi t^{a0-1}/Gamma(a0) + f t^{a0+a1-1}/Gamma(a0+a1)."""
    if p.lam != 0.0:
        raise DomainError("root mode requires lam = 0")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    b = p.alpha0 + p.alpha1
    return p.phi_coeff * math.pow(t, p.alpha0 - 1.0) / gamma(p.alpha0) + (
        p.f_coeff * math.pow(t, b - 1.0) / gamma(b)
    )


def u1_mode(p: ModeParams, t: float) -> float:
    """First-family factor: phi e_{rho,a0}(t,lam) + f e_{rho,a0+a1}(t,lam)."""
    if not (p.lam > 0.0):
        raise DomainError("oscillatory modes require lam > 0")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    out = 0.0
    if p.phi_coeff != 0.0:
        out += p.phi_coeff * mltf_eval(MLTFSpec(p.rho, p.alpha0, p.lam), t)
    if p.f_coeff != 0.0:
        out += p.f_coeff * mltf_eval(
            MLTFSpec(p.rho, p.alpha0 + p.alpha1, p.lam), t
        )
    return out


def u2_mode(
    p: ModeParams, phi1: float, f1: float, t: float, tol: float = 1e-8
) -> float:
    """Second-family factor; (phi1, f1) are the companion first-family data.

    The coupling term is 2 sqrt(lam) (e_{rho,rho}(., lam) * u1)(t), expanded
    into two kernel-pair convolutions through u1's closed form.
    """
    if not (p.lam > 0.0):
        raise DomainError("oscillatory modes require lam > 0")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    rho = p.rho
    b = p.alpha0 + p.alpha1
    out = 0.0
    if p.phi_coeff != 0.0:
        out += p.phi_coeff * mltf_eval(MLTFSpec(rho, p.alpha0, p.lam), t)
    if p.f_coeff != 0.0:
        out += p.f_coeff * mltf_eval(MLTFSpec(rho, b, p.lam), t)
    kernel = MLTFSpec(rho, rho, p.lam)
    two_sqrt = 2.0 * math.sqrt(p.lam)
    if phi1 != 0.0:
        out += two_sqrt * phi1 * mltf_convolve(
            kernel, MLTFSpec(rho, p.alpha0, p.lam), t, tol
        )
    if f1 != 0.0:
        out += two_sqrt * f1 * mltf_convolve(kernel, MLTFSpec(rho, b, p.lam), t, tol)
    return out


def mode_residual(
    p: ModeParams,
    mode: int,
    companions: tuple[float, float] = (0.0, 0.0),
    t: float = 1.0,
    steps: int = 2048,
) -> float:
    """|D u + lam u - f - coupling| at time t, with the operator applied
    numerically to the mode's own trace; coupling = 2 sqrt(lam) u1(t) for
    mode 2, else 0."""
    if mode not in (0, 1, 2):
        raise DomainError("mode must be 0, 1 or 2")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    order = DNMultiOrder((p.alpha0, p.alpha1))
    if mode == 0:
        trace = lambda tau: u0_mode(p, tau)
    elif mode == 1:
        trace = lambda tau: u1_mode(p, tau)
    else:
        trace = lambda tau: u2_mode(p, companions[0], companions[1], tau)
    if p.phi_coeff == 0.0 and p.f_coeff == 0.0 and companions == (0.0, 0.0):
        return 0.0
    dn_val = dn_apply(order, trace, t, steps)
    u_val = trace(t)
    coupling = 0.0
    if mode == 2:
        p1 = ModeParams(p.alpha0, p.alpha1, p.lam, companions[0], companions[1])
        coupling = 2.0 * math.sqrt(p.lam) * u1_mode(p1, t)
    return abs(dn_val + p.lam * u_val - p.f_coeff - coupling)
