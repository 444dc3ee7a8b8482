"""Fractional integral/derivative operators on callables and sampled traces.

All operators discretize on a shared graded grid tau_j = t (j/n)^gamma over
[0, t]: the fractional integral by cellwise-exact product integration of the
piecewise-linear interpolant, the fractional derivative by the L1 scheme with
nonuniform weights, and first derivatives by second-order differences.
Compositions chain stages on the same grid, so no resampling error enters
between stages.  The grading resolves the t^{alpha0-1} initial layer of
solution traces, which a uniform grid provably cannot handle at the accuracy
the verification suite needs.

Solution traces behave like a short ladder of powers c_i tau^{p_i} near the
origin, with the leading exponent possibly negative and sitting exactly on
the derivative kernel's annihilated power.  Every stage therefore splits its
input into analytic leading powers (mapped exactly through the Euler monomial
rules, including the pole) plus a finite remainder handled by the quadrature.
Inputs with a finite origin value get a plain constant split, which keeps the
operators exactly linear on such data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import rgamma

from .errors import DomainError
from .special_functions import gamma

__all__ = [
    "DNMultiOrder",
    "SampledFunction",
    "rl_monomial",
    "rl_integral",
    "rl_derivative",
    "dn_apply",
    "fundamental_relation_residual",
    "DNTraceOperator",
]

DEFAULT_STEPS = 2048
DEFAULT_GRADING = 3.0


@dataclass(frozen=True)
class DNMultiOrder:
    """Order sequence (alpha_0, ..., alpha_m) of the composite time operator
    J^{1-alpha_m} D^{alpha_{m-1}} ... D^{alpha_0}."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        if len(self.alphas) < 2:
            raise DomainError("order sequence needs at least two entries")
        for a in self.alphas:
            if not (0.0 < a <= 1.0):
                raise DomainError(f"every order must lie in (0, 1], got {a}")
        if not (self.rho > 0.0):
            raise DomainError(f"total order {self.rho} must be positive")

    @property
    def m(self) -> int:
        return len(self.alphas) - 1

    @property
    def rhos(self) -> tuple[float, ...]:
        """rho_k = alpha_0 + ... + alpha_k - 1 for k = 0..m."""
        acc = -1.0
        out = []
        for a in self.alphas:
            acc += a
            out.append(acc)
        return tuple(out)

    @property
    def rho(self) -> float:
        return sum(self.alphas) - 1.0


@dataclass
class SampledFunction:
    """A function known at strictly increasing sample times in [0, T]."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.shape != self.values.shape:
            raise DomainError("nodes and values must be 1-d arrays of equal length")
        if len(self.nodes) < 3:
            raise DomainError("need at least 3 samples")
        if self.nodes[0] < 0.0:
            raise DomainError("sample times must start at or after 0")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise DomainError("sample times must be strictly increasing")


def rl_monomial(alpha: float, mu: float, kind: str = "integral") -> tuple[float, float]:
    """Exact action of J^alpha or D^alpha on t^mu: (coefficient, exponent).

    Derivative coefficients vanish at the Gamma poles (mu - alpha + 1 a
    nonpositive integer), matching D^alpha t^{alpha-1} = 0.
    """
    if not (mu > -1.0):
        raise DomainError(f"monomial exponent must exceed -1, got {mu}")
    if kind == "integral":
        if not (alpha > 0.0):
            raise DomainError("integral order must be positive")
        return gamma(mu + 1.0) * float(rgamma(mu + alpha + 1.0)), mu + alpha
    if kind == "derivative":
        if not (0.0 < alpha < 1.0):
            raise DomainError("derivative order must lie in (0, 1)")
        return gamma(mu + 1.0) * float(rgamma(mu - alpha + 1.0)), mu - alpha
    raise DomainError(f"unknown monomial mode {kind!r}")


# ---------------------------------------------------------------------------
# grid representation: analytic leading powers + finite remainder samples

Lead = tuple[float, float]  # (coefficient, exponent)


@dataclass
class _GridFn:
    grid: np.ndarray
    remainder: np.ndarray  # finite everywhere, 0 at the origin node
    leads: tuple[Lead, ...] = field(default_factory=tuple)

    def value_at_end(self) -> float:
        t = self.grid[-1]
        return float(
            self.remainder[-1]
            + math.fsum(c * math.pow(t, p) for c, p in self.leads)
        )

    def values_at(self, idx: np.ndarray) -> np.ndarray:
        """Materialized values at positive-time node indices."""
        tau = self.grid[idx]
        out = self.remainder[idx].copy()
        for c, p in self.leads:
            out += c * np.power(tau, p)
        return out


def _lead_values(grid: np.ndarray, leads: tuple[Lead, ...]) -> np.ndarray:
    out = np.zeros_like(grid)
    if not leads:
        return out
    pos = grid > 0.0
    for c, p in leads:
        out[pos] += c * np.power(grid[pos], p)
        if p == 0.0:
            out[~pos] += c
    return out


def _fit_power(t1: float, v1: float, t2: float, v2: float) -> Lead | None:
    """Leading power c*tau^p through two early samples, if consistent."""
    if v1 == 0.0 or v2 == 0.0 or (v1 > 0.0) != (v2 > 0.0):
        return None
    p = math.log(abs(v2 / v1)) / math.log(t2 / t1)
    if not (-0.999 < p < 4.0):
        return None
    return (v1 / math.pow(t1, p), p)


def _fit_candidates(
    grid: np.ndarray, vals: np.ndarray, exponents: tuple[float, ...]
) -> tuple[Lead, ...] | None:
    """Fit the earliest samples on a known exponent ladder.

    The composite operator is discontinuous in the leading exponent at its
    kernel power (delta * tau^{delta-1} acts as a nascent delta under the
    trailing integral), so a free-exponent fit with a small error there
    produces an O(1) spurious output.  Fitting coefficients on the exact
    ladder instead makes the pole column map to exactly zero.  On the graded
    grid the fit nodes sit deep inside the initial layer, so omitted higher
    ladder terms contaminate the coefficients only at round-off level.
    """
    expos: list[float] = []
    for e in exponents:
        if e > -0.999 and all(abs(e - x) > 0.02 for x in expos):
            expos.append(e)
    n = len(expos)
    if n == 0 or len(vals) < n + 3:
        return None
    idx = np.arange(1, n + 1)
    earr = np.array(expos)
    # scale columns to their node-1 size: graded nodes make raw powers extreme
    colscale = np.power(grid[1], earr)
    V = np.power.outer(grid[idx] / grid[1], earr)
    try:
        coef = np.linalg.solve(V, vals[idx]) / colscale
    except np.linalg.LinAlgError:
        return None
    for j in (n + 1, n + 2):  # validate on the next two nodes
        pred = float(np.dot(np.power(grid[j], earr), coef))
        scale = abs(vals[j]) + abs(vals[1]) * (grid[1] / grid[j]) ** max(
            0.0, -min(expos)
        )
        if abs(pred - vals[j]) > 0.05 * (scale + 1e-300):
            return None
    # Keep only the near-singular part of the ladder.  Higher terms are
    # bulk-large (their coefficients carry powers of lam) while the trace
    # itself stays O(1); subtracting them would hand the quadrature a huge,
    # curved remainder.  Terms with small exponents are bulk-benign and are
    # exactly what the quadrature cannot resolve near the origin.
    return tuple(
        (float(c), e) for c, e in zip(coef, expos) if c != 0.0 and e <= 0.35
    )


def _sample_callable(f, grid: np.ndarray) -> np.ndarray:
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(f(grid), dtype=float)
        if vals.shape == grid.shape:
            return vals
    except Exception:
        pass
    out = np.empty_like(grid)
    for i, tau in enumerate(grid):
        try:
            out[i] = float(f(float(tau)))
        except (DomainError, ZeroDivisionError, ValueError, OverflowError):
            out[i] = math.nan
    return out


def _sample_sampled(sf: SampledFunction, grid: np.ndarray) -> np.ndarray:
    if grid[-1] > sf.nodes[-1] * (1.0 + 1e-12):
        raise DomainError(
            f"operator needs values up to t={grid[-1]}, samples end at {sf.nodes[-1]}"
        )
    interp = PchipInterpolator(sf.nodes, sf.values, extrapolate=False)
    out = np.asarray(interp(np.clip(grid, sf.nodes[0], sf.nodes[-1])), dtype=float)
    below = grid < sf.nodes[0]
    if np.any(below):
        lead = _fit_power(sf.nodes[0], sf.values[0], sf.nodes[1], sf.values[1])
        if lead is not None:
            c, p = lead
            pos = below & (grid > 0.0)
            out[pos] = c * np.power(grid[pos], p)
            out[grid == 0.0] = c if p == 0.0 else (0.0 if p > 0.0 else math.nan)
        else:
            # no consistent power behavior: ramp linearly to zero
            out[below] = sf.values[0] * grid[below] / sf.nodes[0]
    return out


def _graded_grid(t: float, steps: int, grading: float) -> np.ndarray:
    j = np.arange(steps + 1, dtype=float)
    return t * (j / steps) ** grading


def _make_gridfn(
    f,
    t: float,
    steps: int,
    leads: tuple[Lead, ...] | None = None,
    candidate_exponents: tuple[float, ...] | None = None,
    grading: float = DEFAULT_GRADING,
) -> _GridFn:
    if not (t > 0.0):
        raise DomainError(f"operator endpoint must be positive, got {t}")
    if steps < 8:
        raise DomainError("need at least 8 grid intervals")
    grid = _graded_grid(t, steps, grading)
    if isinstance(f, SampledFunction):
        vals = _sample_sampled(f, grid)
    else:
        vals = _sample_callable(f, grid)
    if not np.all(np.isfinite(vals[1:])):
        raise DomainError("function values must be finite for all positive times")
    if leads is None:
        v0 = vals[0]
        if math.isfinite(v0):
            # constant split: keeps the operators exactly linear on data
            # with a finite origin value
            leads = ((v0, 0.0),) if v0 != 0.0 else ()
        else:
            leads = None
            if candidate_exponents is not None:
                leads = _fit_candidates(grid, vals, candidate_exponents)
            if leads is None:
                lead = _fit_power(grid[1], vals[1], grid[2], vals[2])
                leads = (lead,) if lead is not None else ()
    leads = tuple((c, p) for c, p in leads if c != 0.0)
    remainder = vals - _lead_values(grid, leads)
    if not math.isfinite(remainder[0]):
        remainder[0] = 0.0
    return _GridFn(grid=grid, remainder=remainder, leads=leads)


# ---------------------------------------------------------------------------
# nonuniform quadrature matrices (exact on piecewise-linear data)


def _stable_power_diff(d: np.ndarray, x: np.ndarray, p: float) -> np.ndarray:
    """(d^p - e^p)/(h p) with e = d-h, x = h/d, written cancellation-free.

    Graded grids pair tiny cells with far targets (x down to ~1e-12); the
    naive difference then carries eps/x relative noise, which the singular
    stage values amplify catastrophically.  Returns d^{p-1} * S(x) with
    S = -expm1(p log1p(-x))/(p x), S(0) = 1.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -np.expm1(p * np.log1p(-x)) / (p * x)
    return np.power(d, p - 1.0) * np.where(x > 0.0, s, 1.0)


def _moment_factor(x: np.ndarray, alpha: float) -> np.ndarray:
    """G(x) = int_0^1 sigma (1 - x sigma)^{alpha-1} dsigma, stable in x.

    Series for small x, closed form elsewhere; G(0) = 1/2.
    """
    out = np.empty_like(x)
    small = x < 0.1
    xs = np.where(small, x, 0.0)
    # G = sum_k binom(alpha-1, k) (-x)^k / (k+2), 12 terms suffice below 0.1
    acc = np.zeros_like(xs)
    coef = 1.0
    xpow = np.ones_like(xs)
    for k in range(12):
        acc += coef * xpow / (k + 2.0)
        coef *= (alpha - 1.0 - k) / (k + 1.0)
        xpow *= -xs
    out[small] = acc[small]
    xl = np.where(small, 0.5, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        one_m = np.power(1.0 - xl, alpha)
        big = (
            (1.0 - one_m) / alpha - (1.0 - one_m * (1.0 - xl)) / (alpha + 1.0)
        ) / (xl * xl)
    out[~small] = big[~small]
    return out


def _j_matrix(
    grid: np.ndarray, alpha: float, targets: np.ndarray | None = None
) -> np.ndarray:
    """W with (W @ f)[i] = J^alpha f(targets_i) for piecewise-linear f.

    targets defaults to the grid itself; passing a single target yields one
    row, which is all the endpoint-valued public operators need.
    """
    n = len(grid) - 1
    a = grid[:-1][None, :]
    b = grid[1:][None, :]
    h = b - a
    ti = (grid if targets is None else np.asarray(targets))[:, None]
    mask = ti > a
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(mask, ti - a, 1.0)
        x = np.where(mask, np.minimum(h / d, 1.0), 0.0)
        base = h * np.power(d, alpha - 1.0)
        # cell = f_a * u0 + slope * u1 with u0 = h d^{alpha-1} H(x) and
        # u1/h = h d^{alpha-1} G(x); regroup on (f_a, f_b)
        H = _stable_power_diff(np.ones_like(d), x, alpha)
        G = _moment_factor(x, alpha)
        wa = base * (H - G)
        wb = base * G
    wa = np.where(mask, wa, 0.0)
    wb = np.where(mask, wb, 0.0)
    W = np.zeros((ti.shape[0], n + 1))
    W[:, :-1] += wa
    W[:, 1:] += wb
    W *= float(rgamma(alpha))
    return W


def _d_matrix(
    grid: np.ndarray, alpha: float, targets: np.ndarray | None = None
) -> np.ndarray:
    """W with (W @ f)[i] = D^alpha f(targets_i) for piecewise-linear f, f(0)=0."""
    n = len(grid) - 1
    a = grid[:-1][None, :]
    b = grid[1:][None, :]
    h = b - a
    ti = (grid if targets is None else np.asarray(targets))[:, None]
    mask = ti > a
    p = 1.0 - alpha
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(mask, ti - a, 1.0)
        x = np.where(mask, np.minimum(h / d, 1.0), 0.0)
        kern = _stable_power_diff(d, x, p)
    kern = np.where(mask, kern, 0.0)
    W = np.zeros((ti.shape[0], n + 1))
    W[:, :-1] -= kern
    W[:, 1:] += kern
    W *= p * float(rgamma(2.0 - alpha))  # 1/Gamma(1-alpha) = p/Gamma(2-alpha)
    return W


def _map_leads(leads: tuple[Lead, ...], order: float, kind: str) -> tuple[Lead, ...]:
    out = []
    for c, p in leads:
        coef, expo = rl_monomial(order, p, kind)
        if c * coef != 0.0:
            out.append((c * coef, expo))
    return tuple(out)


def _d_stage(g: _GridFn, alpha: float, W: np.ndarray | None = None) -> _GridFn:
    if alpha == 1.0:
        leads = tuple((c * p, p - 1.0) for c, p in g.leads if c * p != 0.0)
        rem = np.gradient(g.remainder, g.grid, edge_order=2)
        rem[0] = 0.0
    else:
        leads = _map_leads(g.leads, alpha, "derivative")
        if W is None:
            W = _d_matrix(g.grid, alpha)
        rem = W @ g.remainder
        rem[0] = 0.0
    return _GridFn(grid=g.grid, remainder=rem, leads=leads)


def _j_stage(g: _GridFn, mu: float, W: np.ndarray | None = None) -> _GridFn:
    if mu == 0.0:
        return g
    leads = _map_leads(g.leads, mu, "integral")
    if W is None:
        W = _j_matrix(g.grid, mu)
    rem = W @ g.remainder
    rem[0] = 0.0
    return _GridFn(grid=g.grid, remainder=rem, leads=leads)


def _j_end(g: _GridFn, mu: float) -> float:
    """J^mu value at the last grid node (single quadrature row)."""
    if mu == 0.0:
        return g.value_at_end()
    t = g.grid[-1]
    row = _j_matrix(g.grid, mu, targets=g.grid[-1:])[0]
    leads = _map_leads(g.leads, mu, "integral")
    return float(row @ g.remainder) + float(
        math.fsum(c * math.pow(t, p) for c, p in leads)
    )


def _d_end(g: _GridFn, alpha: float) -> float:
    """D^alpha value at the last grid node (single quadrature row)."""
    t = g.grid[-1]
    if alpha == 1.0:
        tail = g.grid[-3:]
        vals = g.remainder[-3:]
        h1 = tail[1] - tail[0]
        h2 = tail[2] - tail[1]
        # second-order one-sided derivative on the nonuniform tail
        num = (
            vals[0] * h2 / (h1 * (h1 + h2))
            - vals[1] * (h1 + h2) / (h1 * h2)
            + vals[2] * (2.0 * h2 + h1) / (h2 * (h1 + h2))
        )
        leads = tuple((c * p, p - 1.0) for c, p in g.leads if c * p != 0.0)
        return float(num) + float(
            math.fsum(c * math.pow(t, p) for c, p in leads)
        )
    row = _d_matrix(g.grid, alpha, targets=g.grid[-1:])[0]
    leads = _map_leads(g.leads, alpha, "derivative")
    return float(row @ g.remainder) + float(
        math.fsum(c * math.pow(t, p) for c, p in leads)
    )


def _dn_candidates(order: DNMultiOrder) -> tuple[float, ...] | None:
    if order.m != 1:
        return None
    a0, a1 = order.alphas
    rho = order.rho
    return (a0 - 1.0, a0 - 1.0 + rho, a0 - 1.0 + a1, a0 - 1.0 + 2.0 * rho)


def _dn_gridfn(
    order: DNMultiOrder,
    f,
    t: float,
    steps: int,
    leads: tuple[Lead, ...] | None = None,
    grading: float = DEFAULT_GRADING,
) -> _GridFn:
    g = _make_gridfn(
        f, t, steps, leads=leads,
        candidate_exponents=_dn_candidates(order), grading=grading,
    )
    for a in order.alphas[:-1]:
        g = _d_stage(g, a)
    return _j_stage(g, 1.0 - order.alphas[-1])


# ---------------------------------------------------------------------------
# public operators


def rl_integral(
    alpha: float, f, t: float, steps: int = DEFAULT_STEPS,
    grading: float = DEFAULT_GRADING,
) -> float:
    """J^alpha f(t): product integration, O(steps^-2) for smooth f."""
    if not (alpha > 0.0):
        raise DomainError(f"integral order must be positive, got {alpha}")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    g = _make_gridfn(f, t, steps, grading=grading)
    return _j_end(g, alpha)


def rl_derivative(
    alpha: float, f, t: float, steps: int = DEFAULT_STEPS,
    grading: float = DEFAULT_GRADING,
) -> float:
    """D^alpha f(t) = d/dt J^{1-alpha} f(t), realized by the L1 scheme."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"derivative order must lie in (0, 1), got {alpha}")
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    g = _make_gridfn(f, t, steps, grading=grading)
    return _d_end(g, alpha)


def dn_apply(
    order: DNMultiOrder, f, t: float, steps: int = DEFAULT_STEPS,
    grading: float = DEFAULT_GRADING,
) -> float:
    """Apply the composite operator J^{1-alpha_m} D^{alpha_{m-1}}...D^{alpha_0}."""
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    g = _make_gridfn(
        f, t, steps, candidate_exponents=_dn_candidates(order), grading=grading
    )
    for a in order.alphas[:-2]:
        g = _d_stage(g, a)
    g = _d_stage(g, order.alphas[-2])
    return _j_end(g, 1.0 - order.alphas[-1])


def fundamental_relation_residual(
    order: DNMultiOrder, f, t: float, steps: int = DEFAULT_STEPS
) -> float:
    """|J^{rho_m}(D f)(t) - f(t) + sum_k t^{rho_k}/Gamma(rho_k+1) * i_k| where
    i_k is the order-rho_k sub-operator of f at 0+ (taken at the first node)."""
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    g = _dn_gridfn(order, f, t, steps)
    lhs = _j_stage(g, order.rho).value_at_end()

    if isinstance(f, SampledFunction):
        f_at_t = float(PchipInterpolator(f.nodes, f.values)(t))
    else:
        f_at_t = float(f(t))

    t1 = t / steps
    rhos = order.rhos
    correction = 0.0
    for k in range(order.m):
        sub = order.alphas[: k + 1]
        if len(sub) == 1:
            if sub[0] == 1.0:
                init = float(f(t1)) if not isinstance(f, SampledFunction) else float(
                    PchipInterpolator(f.nodes, f.values)(t1)
                )
            else:
                init = rl_integral(1.0 - sub[0], f, t1, steps)
        else:
            init = dn_apply(DNMultiOrder(sub), f, t1, steps)
        correction += math.pow(t, rhos[k]) * float(rgamma(rhos[k] + 1.0)) * init
    return abs(lhs - f_at_t + correction)


class DNTraceOperator:
    """Composite-operator application to many traces on one shared grid.

    Precomputes the nonuniform stage matrices once; traces are supplied as
    columns.  Used by the verification module, which applies the operator to
    every spatial column of a solution field.
    """

    def __init__(
        self,
        order: DNMultiOrder,
        t: float,
        steps: int = DEFAULT_STEPS,
        grading: float = DEFAULT_GRADING,
    ):
        if order.m != 1:
            raise DomainError("trace operator supports the m=1 composition")
        if not (t > 0.0):
            raise DomainError(f"time must be positive, got {t}")
        self.order = order
        self.grid = _graded_grid(t, steps, grading)
        a0, a1 = order.alphas
        self._W_d = None if a0 == 1.0 else _d_matrix(self.grid, a0)
        self._W_j = None if a1 == 1.0 else _j_matrix(self.grid, 1.0 - a1)

    def apply(self, trace_values: np.ndarray, leads: tuple[Lead, ...]) -> np.ndarray:
        """Operator values at all grid nodes for one trace sampled on .grid.

        ``trace_values[0]`` may be non-finite; the leads must describe the
        origin behavior in that case.
        """
        vals = np.asarray(trace_values, dtype=float)
        leads = tuple((c, p) for c, p in leads if c != 0.0)
        rem = vals - _lead_values(self.grid, leads)
        if not math.isfinite(rem[0]):
            rem[0] = 0.0
        g = _GridFn(grid=self.grid, remainder=rem, leads=leads)
        a0, a1 = self.order.alphas
        g = _d_stage(g, a0, W=self._W_d)
        g = _j_stage(g, 1.0 - a1, W=self._W_j)
        out = np.full_like(self.grid, math.nan)
        out[1:] = g.values_at(np.arange(1, len(self.grid)))
        lead0 = math.fsum(c for c, p in g.leads if p == 0.0) if g.leads else 0.0
        if all(p >= 0.0 for _, p in g.leads):
            out[0] = lead0 + g.remainder[0]
        return out
