"""Command-line front end: forward/backward/verify/selftest pipelines.

Writes three artifacts per run into the output directory:

* ``u.csv``      - the solution grid (t, x, u, weighted_u), sorted by (t, x)
* ``coeffs.csv`` - per-mode data/solution coefficients and amplification
* ``report.json`` - compatibility reports, residuals, tail estimate, timing

Exit codes: 0 success; 1 unexpected error; 2 tolerance verdict failed in
verify mode; 3 invalid configuration; 4 I/O failure; 5 numerical failure
(quadrature cap or degenerate recovery divisor).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from .backward_solver import BackwardProblem, amplification_factor, recover_source
from .config import RunConfig, parse_config, serialize_config
from .errors import (
    AccuracyError,
    ConfigurationError,
    DegenerateHorizonError,
    DomainError,
    OracleInstabilityError,
)
from .forward_solver import ForwardProblem, solve_forward
from .fractional_ops import DNMultiOrder
from .spectral_basis import SpectralCoeffs, project
from .special_functions import MLTFSpec, mltf_eval
from .verification import (
    boundary_residual,
    heat_oracle,
    initial_residual,
    pde_residual,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_NUMERICAL = 5

_EPILOG = """exit codes:
  0  success
  1  unexpected error
  2  tolerance verdict failed (verify mode)
  3  invalid configuration (syntax or semantic; all violations are listed)
  4  I/O failure while reading inputs or writing artifacts
  5  numerical failure (quadrature refinement cap, degenerate horizon)

environment:
  DNSPECTRAL_THREADS  optional integer >= 1 capping library parallelism
                      (the current implementation is serial; the value is
                      validated and recorded in report.json)
"""


def _fmt(v) -> str:
    return repr(float(v))


def _write_field_csv(path: str, field) -> None:
    lines = ["t,x,u,weighted_u"]
    for i, t in enumerate(field.t_grid):
        for j, x in enumerate(field.x_grid):
            lines.append(
                f"{_fmt(t)},{_fmt(x)},{_fmt(field.values[i, j])},"
                f"{_fmt(field.weighted[i, j])}"
            )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_coeffs_csv(
    path: str,
    phi_c: SpectralCoeffs | None,
    psi_c: SpectralCoeffs | None,
    f_c: SpectralCoeffs | None,
    u_at_T: SpectralCoeffs | None,
    amplification: np.ndarray | None,
    N: int,
) -> None:
    def cell(coeffs, attr, k=None):
        if coeffs is None:
            return ""
        if attr == "c0":
            return _fmt(coeffs.c0)
        return _fmt(getattr(coeffs, attr)[k - 1])

    lines = ["family,k,phi,psi,f,u_at_T,amplification"]
    lines.append(
        "root,0,"
        f"{cell(phi_c, 'c0')},{cell(psi_c, 'c0')},{cell(f_c, 'c0')},"
        f"{cell(u_at_T, 'c0')},"
    )
    for k in range(1, N + 1):
        amp = "" if amplification is None else _fmt(amplification[k - 1])
        lines.append(
            f"cosine,{k},"
            f"{cell(phi_c, 'c1', k)},{cell(psi_c, 'c1', k)},{cell(f_c, 'c1', k)},"
            f"{cell(u_at_T, 'c1', k)},{amp}"
        )
        lines.append(
            f"sine,{k},"
            f"{cell(phi_c, 'c2', k)},{cell(psi_c, 'c2', k)},{cell(f_c, 'c2', k)},"
            f"{cell(u_at_T, 'c2', k)},{amp}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _compat_dict(report) -> dict:
    if hasattr(report, "conditions"):
        return {
            "value_at_right": report.value_at_right,
            "derivative_mismatch": report.derivative_mismatch,
            "second_derivative_at_right": report.second_derivative_at_right,
            "third_derivative_mismatch": report.third_derivative_mismatch,
            "fourth_difference_bound": report.fourth_difference_bound,
            "conditions": report.conditions,
            "ok": report.ok,
        }
    return {
        "value_at_right": report.value_at_right,
        "derivative_mismatch": report.derivative_mismatch,
        "value_ok": report.value_ok,
        "derivative_ok": report.derivative_ok,
        "ok": report.ok,
    }


def _amplifications(cfg: RunConfig) -> np.ndarray:
    rho = cfg.alpha0 + cfg.alpha1 - 1.0
    beta = cfg.alpha0 + cfg.alpha1
    out = np.empty(cfg.N)
    for k in range(1, cfg.N + 1):
        lam = (2.0 * math.pi * k) ** 2
        out[k - 1] = 1.0 / mltf_eval(MLTFSpec(rho, beta, lam), cfg.T)
    return out


def _run_forward(cfg: RunConfig, outdir: str, base_dir: str, report: dict) -> int:
    phi = cfg.phi_spec.build(base_dir)
    source = cfg.f_spec.build(base_dir) if cfg.f_spec is not None else None
    problem = ForwardProblem(
        alpha0=cfg.alpha0, alpha1=cfg.alpha1, T=cfg.T, phi=phi,
        source=source, N=cfg.N, nx=cfg.nx, nt=cfg.nt,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_forward(problem, allow_incompatible=True)
    report["warnings"] = [str(w.message) for w in caught]
    report["compatibility"] = {"phi": _compat_dict(sol.compat)}
    report["tail_estimate"] = sol.tail_estimate
    _write_field_csv(os.path.join(outdir, "u.csv"), sol.field)
    _write_coeffs_csv(
        os.path.join(outdir, "coeffs.csv"),
        sol.phi_coeffs, None, sol.f_coeffs, sol.u_coeffs[-1],
        _amplifications(cfg), cfg.N,
    )
    return EXIT_OK


def _run_backward(cfg: RunConfig, outdir: str, base_dir: str, report: dict) -> int:
    psi = cfg.psi_spec.build(base_dir)
    phi = cfg.phi_spec.build(base_dir) if cfg.phi_spec is not None else None
    problem = BackwardProblem(
        alpha0=cfg.alpha0, alpha1=cfg.alpha1, T=cfg.T, phi=phi, psi=psi,
        N=cfg.N, nx=cfg.nx, nt=cfg.nt,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = recover_source(problem, cutoff_amplification=cfg.cutoff_amplification)
    report["warnings"] = [str(w.message) for w in caught]
    report["compatibility"] = {"psi": _compat_dict(rec.report["psi_compat"])}
    report["roundtrip_l2"] = rec.report["roundtrip_l2"]
    report["roundtrip_l2_rel"] = rec.report["roundtrip_l2_rel"]
    report["max_amplification"] = rec.report["max_amplification"]
    report["dropped_modes"] = rec.report["dropped_modes"]
    phi_c = project(phi, cfg.N) if phi is not None else SpectralCoeffs(
        0.0, np.zeros(cfg.N), np.zeros(cfg.N)
    )
    psi_c = project(psi, cfg.N)
    u_at_T = rec.report.get("u_coeffs_at_T")
    _write_field_csv(os.path.join(outdir, "u.csv"), rec.u_field)
    _write_coeffs_csv(
        os.path.join(outdir, "coeffs.csv"),
        phi_c, psi_c, rec.f_coeffs, u_at_T, rec.amplification, cfg.N,
    )
    return EXIT_OK


def _run_verify(cfg: RunConfig, outdir: str, base_dir: str, report: dict) -> int:
    phi = cfg.phi_spec.build(base_dir)
    source = cfg.f_spec.build(base_dir) if cfg.f_spec is not None else None
    problem = ForwardProblem(
        alpha0=cfg.alpha0, alpha1=cfg.alpha1, T=cfg.T, phi=phi,
        source=source, N=cfg.N, nx=cfg.nx, nt=cfg.nt,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_forward(problem, allow_incompatible=True)
    report["warnings"] = [str(w.message) for w in caught]
    report["compatibility"] = {"phi": _compat_dict(sol.compat)}
    report["tail_estimate"] = sol.tail_estimate

    order = DNMultiOrder((cfg.alpha0, cfg.alpha1))
    steps = int(cfg.tolerances.get("steps", 4096))
    rep = pde_residual(sol.field, source, order, steps=steps)
    bnd = boundary_residual(sol.field)
    init = initial_residual(sol.field, phi, order)
    max_u = float(np.max(np.abs(sol.field.values)))
    if source is not None:
        fmax = float(np.max(np.abs(source(sol.field.x_grid))))
    else:
        fmax = 0.0

    tol_pde = cfg.tolerances.get("pde", 5e-3) * (1.0 + fmax)
    tol_bnd = cfg.tolerances.get("boundary", 1e-4) * max(max_u, 1e-300)
    tol_init = cfg.tolerances.get("initial", 0.02)
    verdicts = {
        "pde": rep.pde_linf <= tol_pde,
        "boundary": bnd <= tol_bnd,
        "initial": init <= tol_init,
    }
    report["residuals"] = {
        "pde_linf": rep.pde_linf,
        "pde_l2": rep.pde_l2,
        "boundary_max": bnd,
        "initial_l2": init,
        "max_abs_u": max_u,
        "grid": rep.grid,
    }
    report["tolerances"] = {"pde": tol_pde, "boundary": tol_bnd, "initial": tol_init}
    report["verdicts"] = verdicts

    # classical orders also get the finite-difference reference comparison
    if cfg.alpha0 == 1.0 and cfg.alpha1 == 1.0:
        oracle = heat_oracle(phi, source, cfg.T, cfg.nx, cfg.nt, sol.field.t_grid)
        diff = float(np.max(np.abs(oracle.values - sol.field.values)))
        report["residuals"]["oracle_linf"] = diff
        verdicts["oracle"] = diff <= cfg.tolerances.get("oracle", 1e-3)

    _write_field_csv(os.path.join(outdir, "u.csv"), sol.field)
    _write_coeffs_csv(
        os.path.join(outdir, "coeffs.csv"),
        sol.phi_coeffs, None, sol.f_coeffs, sol.u_coeffs[-1],
        _amplifications(cfg), cfg.N,
    )
    return EXIT_OK if all(verdicts.values()) else EXIT_VERDICT


def _run_selftest(report: dict) -> int:
    """Bundled invariant suite at desk scale."""
    from .fde_core import ModeParams, mode_residual
    from .spectral_basis import eval_adjoint, eval_eigenfunction, BasisId
    from .special_functions import MLIndex, gamma, ml_eval
    from .spectral_basis import _panel_rule

    checks: list[tuple[str, bool]] = []

    g = gamma(0.5)
    checks.append(("gamma(1/2)^2 = pi", abs(g * g - math.pi) < 1e-12))
    checks.append(
        ("E_{1,1}(-3) = exp(-3)",
         abs(ml_eval(MLIndex(1, 1), -3.0) - math.exp(-3.0)) < 1e-12)
    )
    ok = True
    for alpha in (0.3, 0.6, 0.9):
        for lam in (1.0, 40.0):
            for t in (0.1, 1.0):
                lhs = lam * mltf_eval(MLTFSpec(alpha, alpha + 1.0, lam), t) + mltf_eval(
                    MLTFSpec(alpha, 1.0, lam), t
                )
                ok = ok and abs(lhs - 1.0) < 1e-10
    checks.append(("kernel partition identity", ok))

    ids = [BasisId("root")] + [
        BasisId(f, k) for k in range(1, 9) for f in ("cosine", "sine")
    ]
    xs, ws = _panel_rule(120)
    X = np.array([eval_eigenfunction(b, xs) for b in ids])
    Y = np.array([eval_adjoint(b, xs) for b in ids])
    G = (X * ws) @ Y.T
    checks.append(
        ("bi-orthogonality N=8", float(np.max(np.abs(G - np.eye(len(ids))))) < 1e-10)
    )

    p = ModeParams(1.0, 1.0, 4.0 * math.pi**2, 1.0, 0.0)
    checks.append(
        ("classical mode residual", mode_residual(p, 1, t=0.25, steps=512) < 1e-3)
    )

    report["selftest"] = {name: bool(okv) for name, okv in checks}
    for name, okv in checks:
        print(f"[{'PASS' if okv else 'FAIL'}] {name}")
    return EXIT_OK if all(okv for _, okv in checks) else EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnspectral",
        description="Spectral solver for a time-fractional diffusion equation "
        "with nonlocal boundary conditions.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("forward", "backward", "verify", "selftest"):
        sp = sub.add_parser(mode, epilog=_EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument(
            "--config", required=(mode != "selftest"), help="path to the JSON config"
        )
        sp.add_argument("--output", help="output directory (overrides config)")
        sp.add_argument("--modes", type=int, help="series truncation N (override)")
        sp.add_argument(
            "--grid", nargs=2, type=int, metavar=("NX", "NT"),
            help="output grid sizes (override)",
        )
        sp.add_argument(
            "--cutoff", type=float,
            help="drop recovered modes with amplification above this (override)",
        )
    return parser


def run(cfg: RunConfig, base_dir: str = ".") -> int:
    """Execute the configured pipeline; returns the process exit code."""
    t0 = time.perf_counter()
    report: dict = {"mode": cfg.mode, "config": json.loads(serialize_config(cfg))}
    threads = os.environ.get("DNSPECTRAL_THREADS")
    if threads is not None:
        if not threads.isdigit() or int(threads) < 1:
            raise ConfigurationError(
                f"DNSPECTRAL_THREADS must be an integer >= 1, got {threads!r}"
            )
        report["threads_cap"] = int(threads)
    if cfg.mode == "selftest":
        code = _run_selftest(report)
        report["wall_clock_s"] = time.perf_counter() - t0
        return code
    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    if cfg.mode == "forward":
        code = _run_forward(cfg, outdir, base_dir, report)
    elif cfg.mode == "backward":
        code = _run_backward(cfg, outdir, base_dir, report)
    else:
        code = _run_verify(cfg, outdir, base_dir, report)
    report["wall_clock_s"] = time.perf_counter() - t0
    report["exit_code"] = code
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
            base_dir = os.path.dirname(os.path.abspath(args.config))
            cfg = parse_config(text, base_dir=base_dir)
            if cfg.mode != args.mode:
                raise ConfigurationError(
                    f"config mode {cfg.mode!r} does not match subcommand {args.mode!r}"
                )
        else:
            cfg = RunConfig(mode="selftest")
            base_dir = "."
        if args.output is not None:
            cfg.output_dir = args.output
        if args.modes is not None:
            cfg.N = args.modes
        if args.grid is not None:
            cfg.nx, cfg.nt = args.grid
        if args.cutoff is not None:
            cfg.cutoff_amplification = args.cutoff
        return run(cfg, base_dir=base_dir)
    except ConfigurationError as exc:
        for line in getattr(exc, "violations", [str(exc)]):
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyError, DegenerateHorizonError, OracleInstabilityError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - last resort
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
