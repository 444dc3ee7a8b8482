"""Bi-orthogonal eigenfunction system for the nonlocal boundary conditions.

Primary family: 2(1-x), 4(1-x)cos(2 pi k x), 4 sin(2 pi k x).
Adjoint family: 1, cos(2 pi k x), x sin(2 pi k x).
The pairing <X_i, Y_j> is the identity, which is what makes coefficient
extraction against the adjoint family work; the normalization constants are
load-bearing and must not be changed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError

__all__ = [
    "BasisId",
    "SpectralCoeffs",
    "eigenvalue",
    "eval_eigenfunction",
    "eval_adjoint",
    "project",
    "reconstruct",
    "decay_bound",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BasisId:
    """Basis member: the root function or the k-th cosine/sine member."""

    family: str
    k: int | None = None

    def __post_init__(self):
        if self.family not in ("root", "cosine", "sine"):
            raise DomainError(f"unknown basis family {self.family!r}")
        if self.family == "root":
            if self.k is not None:
                raise DomainError("root member carries no index")
        elif not (isinstance(self.k, int) and self.k >= 1):
            raise DomainError("cosine/sine members need an integer index k >= 1")


@dataclass
class SpectralCoeffs:
    """Coefficients (c0, c1[k], c2[k]) in the bi-orthogonal system."""

    c0: float
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        self.c1 = np.asarray(self.c1, dtype=float)
        self.c2 = np.asarray(self.c2, dtype=float)
        if self.c1.shape != self.c2.shape or self.c1.ndim != 1 or len(self.c1) < 1:
            raise DomainError("c1 and c2 must be equal-length 1-d arrays, N >= 1")

    @property
    def N(self) -> int:
        return len(self.c1)


def eigenvalue(k: int) -> float:
    """0 for the root member, else (2 pi k)^2."""
    if k < 0:
        raise DomainError("eigenvalue index must be >= 0")
    return 0.0 if k == 0 else (_TWO_PI * k) ** 2


def eval_eigenfunction(basis_id: BasisId, x):
    x = np.asarray(x, dtype=float)
    if basis_id.family == "root":
        return 2.0 * (1.0 - x)
    if basis_id.family == "cosine":
        return 4.0 * (1.0 - x) * np.cos(_TWO_PI * basis_id.k * x)
    return 4.0 * np.sin(_TWO_PI * basis_id.k * x)


def eval_adjoint(basis_id: BasisId, x):
    x = np.asarray(x, dtype=float)
    if basis_id.family == "root":
        return np.ones_like(x)
    if basis_id.family == "cosine":
        return np.cos(_TWO_PI * basis_id.k * x)
    return x * np.sin(_TWO_PI * basis_id.k * x)


@lru_cache(maxsize=32)
def _panel_rule(panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite 16-point Gauss-Legendre nodes/weights on [0, 1]."""
    nodes, weights = roots_legendre(16)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 / panels
    xs = (edges[:-1, None] + half * (nodes[None, :] + 1.0)).ravel()
    ws = np.tile(half * weights, panels)
    return xs, ws


def project(f, N: int, panels: int | None = None) -> SpectralCoeffs:
    """Coefficients <f, Y_i> against the adjoint family, i up to N.

    Oscillatory integrands need resolution proportional to k, hence the
    panels >= 10*N rule.
    """
    if N < 1:
        raise DomainError("truncation level must be >= 1")
    if panels is None:
        panels = 10 * N
    if panels < 10 * N:
        raise DomainError(f"panels={panels} under the 10*N resolution rule")
    xs, ws = _panel_rule(panels)
    fx = np.asarray(f(xs), dtype=float)
    if fx.shape != xs.shape:
        fx = np.array([float(f(float(x))) for x in xs])
    c0 = float(np.dot(ws, fx))
    ks = np.arange(1, N + 1)
    phases = _TWO_PI * np.outer(ks, xs)
    c1 = (np.cos(phases) * (ws * fx)).sum(axis=1)
    c2 = (np.sin(phases) * (ws * fx * xs)).sum(axis=1)
    return SpectralCoeffs(c0=c0, c1=c1, c2=c2)


def reconstruct(coeffs: SpectralCoeffs, x):
    """Sum the expansion c0 X_0 + sum_k (c1[k] X_1k + c2[k] X_2k) at x."""
    x = np.asarray(x, dtype=float)
    out = coeffs.c0 * 2.0 * (1.0 - x)
    for i in range(coeffs.N):  # fixed ascending order, scheduling-independent
        k = i + 1
        out = out + coeffs.c1[i] * 4.0 * (1.0 - x) * np.cos(_TWO_PI * k * x)
        out = out + coeffs.c2[i] * 4.0 * np.sin(_TWO_PI * k * x)
    return out


def decay_bound(nderiv: int, norm: float, k: int) -> tuple[float, float]:
    """Coefficient decay bounds (|g_1k|, |g_2k|) <= (1, n+1) * norm / k^n."""
    if nderiv not in (1, 2, 3, 4):
        raise DomainError("derivative count must be in 1..4")
    if norm < 0.0:
        raise DomainError("norm must be >= 0")
    if k < 1:
        raise DomainError("index must be >= 1")
    base = norm / k**nderiv
    return base, (nderiv + 1) * base
