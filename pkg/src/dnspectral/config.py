"""Run configuration: JSON schema, validation, and input-function loading."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError
from .expressions import ExpressionError, parse_expression
from .spectral_basis import BasisId, eval_eigenfunction

__all__ = ["FunctionDescriptor", "RunConfig", "parse_config", "serialize_config"]

MODES = ("forward", "backward", "verify", "selftest")

DEFAULTS = {
    "alpha0": 1.0,
    "alpha1": 1.0,
    "T": 1.0,
    "N": 32,
    "nx": 257,
    "nt": 128,
    "output_dir": "out",
}


@dataclass(frozen=True)
class FunctionDescriptor:
    """Input function as an expression, a CSV sample table, or a basis member."""

    kind: str
    payload: object

    def build(self, base_dir: str = "."):
        """Compile to a callable on [0, 1]."""
        if self.kind == "expression":
            return parse_expression(self.payload)
        if self.kind == "csv":
            path = self.payload
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            data = np.loadtxt(path, delimiter=",", ndmin=2)
            xs, vals = data[:, 0], data[:, 1]
            interp = PchipInterpolator(xs, vals, extrapolate=True)
            return lambda x: np.asarray(interp(x), dtype=float)
        family, k, scale = self.payload
        bid = BasisId(family, None if family == "root" else int(k))
        return lambda x, s=float(scale): s * eval_eigenfunction(bid, x)


@dataclass
class RunConfig:
    mode: str
    alpha0: float = DEFAULTS["alpha0"]
    alpha1: float = DEFAULTS["alpha1"]
    T: float = DEFAULTS["T"]
    N: int = DEFAULTS["N"]
    nx: int = DEFAULTS["nx"]
    nt: int = DEFAULTS["nt"]
    phi_spec: FunctionDescriptor | None = None
    psi_spec: FunctionDescriptor | None = None
    f_spec: FunctionDescriptor | None = None
    output_dir: str = DEFAULTS["output_dir"]
    cutoff_amplification: float | None = None
    tolerances: dict = field(default_factory=dict)


def _check_descriptor(name: str, obj, errors: list[str], base_dir: str):
    if not isinstance(obj, dict) or set(obj) != {"kind", "payload"}:
        errors.append(f'{name}: descriptor must be {{"kind": ..., "payload": ...}}')
        return None
    kind = obj["kind"]
    payload = obj["payload"]
    if kind == "expression":
        if not isinstance(payload, str):
            errors.append(f"{name}: expression payload must be a string")
            return None
        try:
            parse_expression(payload)
        except ExpressionError as exc:
            errors.append(f"{name}: {exc}")
            return None
        return FunctionDescriptor("expression", payload)
    if kind == "csv":
        if not isinstance(payload, str):
            errors.append(f"{name}: csv payload must be a file path")
            return None
        path = payload if os.path.isabs(payload) else os.path.join(base_dir, payload)
        if not os.path.exists(path):
            errors.append(f"{name}: csv file not found: {payload}")
            return None
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except Exception as exc:
            errors.append(f"{name}: csv unreadable: {exc}")
            return None
        if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
            errors.append(f"{name}: csv needs two columns (x, value), >= 3 rows")
            return None
        xs = data[:, 0]
        if np.any(np.diff(xs) <= 0) or xs[0] < 0.0 or xs[-1] > 1.0:
            errors.append(f"{name}: csv x column must increase strictly within [0, 1]")
            return None
        return FunctionDescriptor("csv", payload)
    if kind == "basis":
        ok = (
            isinstance(payload, (list, tuple))
            and len(payload) == 3
            and payload[0] in ("root", "cosine", "sine")
        )
        if ok and payload[0] != "root":
            ok = float(payload[1]) == int(payload[1]) and int(payload[1]) >= 1
        if not ok:
            errors.append(f"{name}: basis payload must be [family, k, scale]")
            return None
        return FunctionDescriptor("basis", (payload[0], int(payload[1]), float(payload[2])))
    errors.append(f"{name}: unknown descriptor kind {kind!r}")
    return None


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises ConfigurationError carrying every violation found (``.violations``),
    or with line/column on a JSON syntax error.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        err = ConfigurationError(
            f"config syntax error: {exc.msg} (line {exc.lineno}, column {exc.colno})"
        )
        err.violations = [str(err)]
        raise err from exc

    errors: list[str] = []
    if not isinstance(raw, dict):
        errors = ["top-level config must be a JSON object"]
        err = ConfigurationError("; ".join(errors))
        err.violations = errors
        raise err

    known = {
        "mode", "alpha0", "alpha1", "T", "N", "nx", "nt",
        "phi", "psi", "f", "output_dir", "cutoff_amplification", "tolerances",
    }
    for key in raw:
        if key not in known:
            errors.append(f"unknown key {key!r}")

    mode = raw.get("mode")
    if mode not in MODES:
        errors.append(f"mode must be one of {MODES}, got {mode!r}")

    def number(key, default, lo=None, lo_open=False, hi=None, hi_closed=True):
        v = raw.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            errors.append(f"{key} must be numeric")
            return default
        v = float(v)
        if lo is not None and (v <= lo if lo_open else v < lo):
            errors.append(f"{key} out of range")
        if hi is not None and (v > hi if hi_closed else v >= hi):
            errors.append(f"{key} out of range")
        return v

    alpha0 = raw.get("alpha0", DEFAULTS["alpha0"])
    alpha1 = raw.get("alpha1", DEFAULTS["alpha1"])
    for nm, v in (("alpha0", alpha0), ("alpha1", alpha1)):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not (
            0.0 < float(v) <= 1.0
        ):
            errors.append(f"{nm} must lie in (0, 1]")
    if (
        isinstance(alpha0, (int, float))
        and isinstance(alpha1, (int, float))
        and not (0.0 < float(alpha0) + float(alpha1) - 1.0 <= 1.0)
    ):
        errors.append("alpha0 + alpha1 - 1 must lie in (0, 1]")

    T = number("T", DEFAULTS["T"], lo=0.0, lo_open=True)

    def integer(key, default, lo):
        v = raw.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            errors.append(f"{key} must be an integer >= {lo}")
            return default
        return v

    N = integer("N", DEFAULTS["N"], 1)
    nx = integer("nx", DEFAULTS["nx"], 8)
    nt = integer("nt", DEFAULTS["nt"], 8)
    if isinstance(N, int) and isinstance(nx, int) and nx < 4 * N:
        errors.append(f"nx={nx} too coarse for N={N} (need nx >= 4N)")

    specs = {}
    for key in ("phi", "psi", "f"):
        if key in raw and raw[key] is not None:
            specs[key] = _check_descriptor(key, raw[key], errors, base_dir)
        else:
            specs[key] = None

    if mode in ("forward", "verify") and specs["phi"] is None:
        errors.append(f"phi is required in {mode} mode (missing phi_spec)")
    if mode == "backward" and specs["psi"] is None:
        errors.append("psi is required in backward mode (missing psi_spec)")

    output_dir = raw.get("output_dir", DEFAULTS["output_dir"])
    if not isinstance(output_dir, str):
        errors.append("output_dir must be a string")
        output_dir = DEFAULTS["output_dir"]

    cutoff = raw.get("cutoff_amplification")
    if cutoff is not None and (
        not isinstance(cutoff, (int, float))
        or isinstance(cutoff, bool)
        or not (float(cutoff) > 0.0)
    ):
        errors.append("cutoff_amplification must be a positive number")
        cutoff = None

    tolerances = raw.get("tolerances", {})
    if not isinstance(tolerances, dict) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
        for v in tolerances.values()
    ):
        errors.append("tolerances must map names to positive numbers")
        tolerances = {}

    if errors:
        err = ConfigurationError("invalid config: " + "; ".join(errors))
        err.violations = errors
        raise err

    return RunConfig(
        mode=mode,
        alpha0=float(alpha0),
        alpha1=float(alpha1),
        T=float(T),
        N=int(N),
        nx=int(nx),
        nt=int(nt),
        phi_spec=specs["phi"],
        psi_spec=specs["psi"],
        f_spec=specs["f"],
        output_dir=output_dir,
        cutoff_amplification=None if cutoff is None else float(cutoff),
        tolerances={k: float(v) for k, v in tolerances.items()},
    )


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config (round-trips to an identical RunConfig)."""
    out = {
        "mode": cfg.mode,
        "alpha0": cfg.alpha0,
        "alpha1": cfg.alpha1,
        "T": cfg.T,
        "N": cfg.N,
        "nx": cfg.nx,
        "nt": cfg.nt,
        "output_dir": cfg.output_dir,
    }
    for key, spec in (("phi", cfg.phi_spec), ("psi", cfg.psi_spec), ("f", cfg.f_spec)):
        if spec is not None:
            payload = spec.payload
            if isinstance(payload, tuple):
                payload = list(payload)
            out[key] = {"kind": spec.kind, "payload": payload}
    if cfg.cutoff_amplification is not None:
        out["cutoff_amplification"] = cfg.cutoff_amplification
    if cfg.tolerances:
        out["tolerances"] = cfg.tolerances
    return json.dumps(out, indent=2, sort_keys=True)
