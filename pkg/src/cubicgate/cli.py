"""``cubicgate`` command line: resource, gate, sweep, benchmark, compose.

Every subcommand prints one JSON document on stdout. Failures print a JSON
object ``{"error": <category>, "message": ...}`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import estimate_chi_eff, optimize_benchmark
from .config import (
    EXIT_BAD_VALUE,
    EXIT_MISSING_FILE,
    ConfigError,
    RunConfig,
    from_mapping,
    load_config,
)
from .errors import CubicGateError
from .fock import coherent, fidelity, moments, quadratures, to_grid
from .gate import branch_wavefunction, run_deterministic, run_probabilistic
from .resource import (
    ResourceSpec,
    compose_betas,
    cubic_coefficients,
    direct_resource,
    o6_polynomial,
    recipe_state,
    recipe_target,
    solve_triple,
)
from .sweep import OutputError, emit_outputs, run_sweep

OUTPUT_ENV = "CUBICGATE_OUTPUT_DIR"
DEFAULT_OUTPUT = "cubicgate-out"
EXIT_RUNTIME = 1
EXIT_IO = 5
RECIPE_DIM = 120


def _cx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def parse_alpha(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"alpha: cannot parse {text!r} as a complex number", EXIT_BAD_VALUE, "alpha")


def _check_alpha(alpha: complex, cfg: RunConfig):
    if abs(alpha) > 2.0 + 1e-12 and not cfg.allow_large_alpha:
        raise ConfigError(
            f"alpha: |alpha| = {abs(alpha):.3f} exceeds 2; pass --allow-large-alpha",
            EXIT_BAD_VALUE,
            "alpha",
        )


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    for dest, key in getattr(args, "_override_keys", {}).items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    return from_mapping(overrides, base=cfg) if overrides else cfg


def output_dir(args, cfg: RunConfig) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(cfg.output_dir or DEFAULT_OUTPUT)


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="ascii")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _rows_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(format(float(v), ".12g") for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_resource(args, cfg: RunConfig) -> dict:
    spec = ResourceSpec(cfg.chi, cfg.g, cfg.signal_dim)
    direct = direct_resource(spec, cfg.grid)
    raw = direct.unnormalized[: args.levels]
    report = {
        "chi": cfg.chi,
        "g": cfg.g,
        "norm": direct.norm,
        "unnormalized_amplitudes": [_cx(c) for c in raw],
        "moments": moments(direct.state).as_dict(),
    }
    if cfg.chi != 0:
        coeffs = cubic_coefficients(spec.chi_prime, cfg.g_gen)
        triple = solve_triple(coeffs)
        # the generation state is squeezed by 1/g_gen and needs more levels than the signal
        dim = max(cfg.signal_dim, RECIPE_DIM)
        made = recipe_state(triple, cfg.g_gen, dim)
        target = direct_resource(recipe_target(spec.chi_prime, cfg.g_gen, dim), cfg.grid)
        report["recipe"] = {
            "g_gen": cfg.g_gen,
            "chi_prime": spec.chi_prime,
            "mu": coeffs.mu,
            "nu": coeffs.nu,
            "C1": coeffs.C1,
            "C2": coeffs.C2,
            "A": coeffs.A,
            "displacements": {
                "alpha": _cx(triple.alpha),
                "beta": _cx(triple.beta),
                "gamma": _cx(triple.gamma),
            },
            "xi": triple.xi,
            "zeta": triple.zeta,
            "residuals": triple.residuals(coeffs),
            "dim": dim,
            "heralding_norm2": made.norm2,
            "fidelity_with_direct": fidelity(made.state, target.state),
        }
    return report


def cmd_gate(args, cfg: RunConfig) -> dict:
    alpha = parse_alpha(args.alpha)
    _check_alpha(alpha, cfg)
    state = coherent(alpha, cfg.signal_dim)
    report = {"alpha": _cx(alpha), "mode": cfg.mode, "chi": cfg.chi, "g": cfg.g, "lambda": cfg.qnd_gain}
    report["input_moments"] = moments(state).as_dict()
    if cfg.mode == "probabilistic":
        spec = ResourceSpec(cfg.chi, cfg.g, cfg.signal_dim, imaginary=True)
        out = run_probabilistic(state, spec, cfg.grid)
        report["success_density"] = out.mass
        report["moments"] = out.report.as_dict()
        if args.dump_wavefunction:
            wf = to_grid(out.rho, cfg.grid)
            rows = [(x, s.real, s.imag) for x, s in zip(wf.x, wf.samples)]
            _write_text(args.dump_wavefunction, _rows_csv(("x", "re", "im"), rows))
        if args.dump_density:
            v = out.rho.amplitudes
            rho = np.outer(v, v.conj())
            _write_text(args.dump_density, _density_csv(rho))
        return report

    gcfg = cfg.gate_config()
    out = run_deterministic(state, gcfg)
    report["moments"] = out.report.as_dict()
    report["homodyne_mass"] = out.mass
    report["p_of_q"] = [[r.q, r.density] for r in out.records]
    if args.dump_wavefunction:
        wf, dens = branch_wavefunction(state, gcfg, args.dump_q)
        rows = [(x, s.real, s.imag) for x, s in zip(wf.x, wf.samples)]
        _write_text(args.dump_wavefunction, _rows_csv(("x", "re", "im"), rows))
        report["dumped_branch"] = {"q": args.dump_q, "density": dens}
    if args.dump_density:
        _write_text(args.dump_density, _density_csv(out.rho.entries))
    return report


def _density_csv(rho) -> str:
    n = rho.shape[0]
    rows = [(i, j, rho[i, j].real, rho[i, j].imag) for i in range(n) for j in range(n)]
    return _rows_csv(("n", "m", "re", "im"), rows)


def cmd_sweep(args, cfg: RunConfig) -> dict:
    result = run_sweep(cfg)
    paths = emit_outputs(result, output_dir(args, cfg))
    margins = [r.margin for r in result.rows if r.margin is not None]
    return {
        "rows": len(result.rows),
        "chi_eff": result.chi_eff,
        "chi_eff_fitted": result.chi_eff_fitted,
        "min_margin": min(margins) if margins else None,
        "timings": result.timings,
        "outputs": {k: str(v) for k, v in paths.items() if k in ("csv", "manifest", "plot_script")},
    }


def chi_eff_from_sweep_csv(path, cfg: RunConfig) -> float:
    """Refit ``chi_eff`` from a sweep table; inputs are rebuilt as coherent states."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"sweep file not found: {p}", EXIT_MISSING_FILE, "sweep_csv")
    with p.open(newline="", encoding="ascii") as fh:
        table = list(csv.DictReader(fh))
    p_in, x2_in, x_in, p_out = [], [], [], []
    for row in table:
        m = moments(coherent(complex(float(row["re_alpha"]), cfg.im_alpha), cfg.signal_dim))
        p_in.append(m.mean_p)
        x2_in.append(m.mean_x2)
        x_in.append(m.mean_x)
        p_out.append(float(row["mean_p"]))
    return estimate_chi_eff(p_in, x2_in, p_out, x_in)


def cmd_benchmark(args, cfg: RunConfig) -> dict:
    alpha = parse_alpha(args.alpha)
    _check_alpha(alpha, cfg)
    if args.sweep_csv:
        chi_eff, source = chi_eff_from_sweep_csv(args.sweep_csv, cfg), "fitted"
    elif cfg.chi_eff is not None:
        chi_eff, source = cfg.chi_eff, "given"
    else:
        raise ConfigError(
            "chi_eff: supply --chi-eff, a chi_eff config value, or --sweep-csv", EXIT_BAD_VALUE, "chi_eff"
        )
    state = coherent(alpha, cfg.signal_dim)
    res = optimize_benchmark(state, chi_eff, cfg.benchmark_config())
    report = {"alpha": _cx(alpha), "chi_eff": chi_eff, "chi_eff_source": source, **res.as_dict()}
    gate_p2 = args.gate_p2
    if args.gate_json:
        gate_p2 = _gate_p2_from_json(args.gate_json)
    if gate_p2 is not None:
        report["gate_p2"] = gate_p2
        report["margin"] = res.report.mean_p2 - gate_p2
    return report


def _gate_p2_from_json(path) -> float:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"gate result not found: {p}", EXIT_MISSING_FILE, "gate_json")
    try:
        return float(json.loads(p.read_text(encoding="utf-8"))["moments"]["mean_p2"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"gate_json: no moments.mean_p2 in {p}", EXIT_BAD_VALUE, "gate_json") from exc


def cmd_compose(args, cfg: RunConfig) -> dict:
    chi = cfg.chi
    betas = compose_betas(chi)
    f1, f2 = betas.factors()
    target = o6_polynomial(chi)
    product = f1 * f2
    coeff_err = float(np.max(np.abs(np.asarray(product.coefficients) - np.asarray(target.coefficients))))

    dim = args.dim
    big = dim + 8
    x = quadratures(big)[0].matrix
    x3 = x @ x @ x
    eye = np.eye(big)
    lhs = (eye + betas.beta1 * x3) @ (eye + betas.beta2 * x3)
    rhs = eye + 1j * chi * x3 - 0.5 * chi**2 * (x3 @ x3)
    op_err = float(np.max(np.abs((lhs - rhs)[:dim, :dim])))
    return {
        "chi": chi,
        "beta1": _cx(betas.beta1),
        "beta2": _cx(betas.beta2),
        "product_coefficients": [_cx(c) for c in product.coefficients],
        "coefficient_error": coeff_err,
        "matrix_error": op_err,
        "dim": dim,
    }


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_overrides(p, spec):
    """Register config-override flags; ``spec`` is ``[(flag, key, type, help)]``."""
    keys = {}
    for flag, key, typ, help_ in spec:
        dest = flag.lstrip("-").replace("-", "_")
        if typ is bool:
            p.add_argument(flag, dest=dest, action="store_const", const=True, default=None, help=help_)
        else:
            p.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
        keys[dest] = key
    p.set_defaults(_override_keys=keys)


_PHYSICS = [
    ("--chi", "chi", float, "cubic coefficient chi"),
    ("--g", "g", float, "resource squeezing (x-variance g/2)"),
    ("--dim", "signal_dim", int, "Fock cutoff"),
]
_GATE = [
    ("--lambda", "qnd_gain", float, "QND gain"),
    ("--mode", "mode", str, "deterministic or probabilistic"),
    ("--q-min", "q_min", float, "homodyne window lower edge"),
    ("--q-max", "q_max", float, "homodyne window upper edge"),
    ("--q-nodes", "q_nodes", int, "Gauss-Legendre nodes in q"),
    ("--allow-large-alpha", "allow_large_alpha", bool, "permit |alpha| > 2"),
]
_BENCH = [
    ("--chi-eff", "chi_eff", float, "effective nonlinearity of the target map"),
    ("--lambda-min", "lambda_min", float, "lower end of the QND-gain search"),
    ("--lambda-max", "lambda_max", float, "upper end of the QND-gain search"),
    ("--allow-large-alpha", "allow_large_alpha", bool, "permit |alpha| > 2"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubicgate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML run configuration")
        return p

    p = add("resource", "cubic resource amplitudes and the subtraction recipe")
    _add_overrides(p, _PHYSICS + [("--g-gen", "g_gen", float, "generation squeezing")])
    p.add_argument("--levels", type=int, default=8, help="number of Fock amplitudes to print")
    p.set_defaults(func=cmd_resource)

    p = add("gate", "run the measurement-based cubic gate on a coherent input")
    p.add_argument("--alpha", default="0", help="coherent amplitude, e.g. 1.5 or 1+0.5j")
    _add_overrides(p, _PHYSICS + _GATE)
    p.add_argument("--dump-wavefunction", help="CSV path for a grid wavefunction (x,re,im)")
    p.add_argument("--dump-q", type=float, default=0.0, help="homodyne outcome of the dumped branch")
    p.add_argument("--dump-density", help="CSV path for the output density matrix (n,m,re,im)")
    p.set_defaults(func=cmd_gate)

    p = add("sweep", "coherent-state sweep with the Gaussian comparison")
    _add_overrides(
        p,
        _PHYSICS
        + _GATE
        + [
            ("--workers", "workers", int, "parallel workers over alpha"),
            ("--chi-eff", "chi_eff", float, "skip the fit and use this chi_eff"),
        ],
    )
    p.add_argument("--no-benchmark", dest="benchmark", action="store_false", default=None)
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or {DEFAULT_OUTPUT})")
    p.set_defaults(func=cmd_sweep)
    p.set_defaults(_override_keys={**p.get_default("_override_keys"), "benchmark": "benchmark"})

    p = add("benchmark", "optimal Gaussian imposter for one coherent input")
    p.add_argument("--alpha", default="0", help="coherent amplitude")
    _add_overrides(p, [("--dim", "signal_dim", int, "Fock cutoff")] + _BENCH)
    p.add_argument("--sweep-csv", help="fit chi_eff from this sweep table")
    p.add_argument("--gate-p2", type=float, help="gate <p^2> to compute the margin against")
    p.add_argument("--gate-json", help="gate subcommand output to compute the margin against")
    p.set_defaults(func=cmd_benchmark)

    p = add("compose", "factor the second-order cubic expansion into two cubic factors")
    _add_overrides(p, [("--chi", "chi", float, "cubic coefficient chi")])
    p.add_argument("--dim", type=int, default=24, help="Fock cutoff for the matrix check")
    p.set_defaults(func=cmd_compose)
    return parser


def _fail(category, message, code, key=None) -> int:
    err = {"error": category, "message": message}
    if key is not None:
        err["key"] = key
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        report = args.func(args, cfg)
    except ConfigError as exc:
        return _fail(exc.category, str(exc), exc.exit_code, exc.key)
    except OutputError as exc:
        return _fail(exc.category, str(exc), EXIT_IO)
    except CubicGateError as exc:
        return _fail(exc.category, str(exc), EXIT_RUNTIME)
    print(json.dumps(report, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
