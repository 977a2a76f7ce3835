"""Coherent-state probe sweep and its file outputs.

The gate runs first for every alpha, then a single ``chi_eff`` is fitted
across the whole sweep, and only then are ideal targets and per-alpha
Gaussian benchmarks computed against that fitted value.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .benchmark import BenchmarkResult, estimate_chi_eff, ideal_moments, optimize_benchmark
from .config import RunConfig
from .errors import CubicGateError, ContractError
from .fock import MomentReport, coherent, moments
from .gate import run_deterministic

CONVENTION_VERSION = "cv-conventions/1"
CSV_HEADER = ("re_alpha", "mean_x", "mean_p", "mean_x2", "mean_p2", "purity", "ideal_p", "bench_p2", "margin")


class OutputError(CubicGateError, OSError):
    category = "io"


@dataclass(frozen=True)
class SweepRow:
    re_alpha: float
    im_alpha: float
    input: MomentReport
    gate: MomentReport
    ideal: MomentReport
    bench: Optional[BenchmarkResult] = None

    def __post_init__(self):
        for name in ("input", "gate", "ideal"):
            rep = getattr(self, name)
            vals = [rep.mean_x, rep.mean_p, rep.mean_x2, rep.mean_p2]
            if not all(math.isfinite(v) for v in vals):
                raise ContractError(f"non-finite {name} moments at re_alpha={self.re_alpha}")

    @property
    def margin(self) -> Optional[float]:
        if self.bench is None:
            return None
        return self.bench.report.mean_p2 - self.gate.mean_p2


@dataclass(frozen=True)
class SweepResult:
    config: RunConfig
    rows: tuple
    chi_eff: float
    chi_eff_fitted: bool
    timings: dict = field(default_factory=dict)


def _tag(exc: Exception, alpha: complex) -> Exception:
    """Copy of ``exc`` whose message names the alpha that triggered it."""
    msg = f"alpha={alpha.real:g}{alpha.imag:+g}j: {exc}"
    try:
        tagged = type(exc)(msg)
    except TypeError:
        tagged = CubicGateError(msg)
    tagged.alpha = alpha
    return tagged


def _pool_map(fn, alphas, states, workers):
    """Ordered ``fn(item)`` over the sweep; a failure is re-raised tagged with its alpha."""

    def guarded(pair):
        alpha, state = pair
        try:
            return fn(state)
        except Exception as exc:
            raise _tag(exc, alpha) from exc

    items = list(zip(alphas, states))

    if workers == 1:
        return [guarded(a) for a in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, items))


def run_sweep(cfg: RunConfig) -> SweepResult:
    alphas = sorted(cfg.alphas(), key=lambda a: a.real)
    gate_cfg = cfg.gate_config()
    timings = {}

    t0 = time.perf_counter()
    inputs = _pool_map(lambda a: coherent(a, gate_cfg.signal_dim), alphas, alphas, 1)
    in_moments = [moments(s) for s in inputs]
    gate_out = _pool_map(lambda s: run_deterministic(s, gate_cfg), alphas, inputs, cfg.workers)
    gate_moments = [out.report for out in gate_out]
    timings["gate_s"] = time.perf_counter() - t0

    if cfg.chi_eff is not None:
        chi_eff, fitted = cfg.chi_eff, False
    else:
        chi_eff = estimate_chi_eff(
            [m.mean_p for m in in_moments],
            [m.mean_x2 for m in in_moments],
            [m.mean_p for m in gate_moments],
            [m.mean_x for m in in_moments],
        )
        fitted = True

    ideals = [ideal_moments(s, chi_eff) for s in inputs]

    benches = [None] * len(alphas)
    if cfg.benchmark:
        t1 = time.perf_counter()
        bcfg = cfg.benchmark_config()
        benches = _pool_map(lambda s: optimize_benchmark(s, chi_eff, bcfg), alphas, inputs, cfg.workers)
        timings["benchmark_s"] = time.perf_counter() - t1
    timings["total_s"] = time.perf_counter() - t0

    rows = tuple(
        SweepRow(a.real, a.imag, mi, mg, mid, b)
        for a, mi, mg, mid, b in zip(alphas, in_moments, gate_moments, ideals, benches)
    )
    return SweepResult(cfg, rows, float(chi_eff), fitted, timings)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else format(float(v), ".12g")


def csv_text(rows) -> str:
    if not rows:
        raise ContractError("refusing to write an empty sweep table")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        g = r.gate
        w.writerow(
            [
                _fmt(r.re_alpha),
                _fmt(g.mean_x),
                _fmt(g.mean_p),
                _fmt(g.mean_x2),
                _fmt(g.mean_p2),
                _fmt(g.purity),
                _fmt(r.ideal.mean_p),
                _fmt(None if r.bench is None else r.bench.report.mean_p2),
                _fmt(r.margin),
            ]
        )
    return buf.getvalue()


def plot_series(result: SweepResult) -> dict:
    """Two-column series keyed by file stem; panel a holds first moments, panel b second."""
    rows = result.rows
    re = [r.re_alpha for r in rows]
    series = {
        "panel_a_gate_x": [r.gate.mean_x for r in rows],
        "panel_a_gate_p": [r.gate.mean_p for r in rows],
        "panel_a_ideal_x": [r.ideal.mean_x for r in rows],
        "panel_a_ideal_p": [r.ideal.mean_p for r in rows],
        "panel_b_gate_x2": [r.gate.mean_x2 for r in rows],
        "panel_b_gate_p2": [r.gate.mean_p2 for r in rows],
        "panel_b_ideal_x2": [r.ideal.mean_x2 for r in rows],
        "panel_b_ideal_p2": [r.ideal.mean_p2 for r in rows],
    }
    if len(rows) >= 3:
        coeffs = np.polyfit(re, series["panel_a_gate_p"], 2)
        series["panel_a_fit_p"] = list(np.polyval(coeffs, re))
    if all(r.bench is not None for r in rows):
        series["panel_a_bench_p"] = [r.bench.report.mean_p for r in rows]
        series["panel_b_bench_p2"] = [r.bench.report.mean_p2 for r in rows]
    return {k: list(zip(re, v)) for k, v in series.items()}


_PLOT_SCRIPT = '''"""Render the sweep panels from the .dat files next to this script (needs matplotlib)."""
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
styles = {{
    "gate": dict(marker="x", linestyle="none"),
    "bench": dict(marker="o", linestyle="none", fillstyle="none"),
    "ideal": dict(linestyle="-"),
    "fit": dict(linestyle="--", color="green"),
}}
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for stem in {stems!r}:
    _, panel, kind, label = stem.split("_", 3)
    data = np.loadtxt(here / (stem + ".dat"))
    ax = axes[0 if panel == "a" else 1]
    ax.plot(data[:, 0], data[:, 1], label=kind + " <" + label + ">", **styles[kind])
for ax, title in zip(axes, ("first moments", "second moments")):
    ax.set_xlabel("Re alpha")
    ax.set_title(title)
    ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(here / "sweep.png", dpi=150)
'''


def manifest(result: SweepResult, csv_bytes: bytes) -> dict:
    return {
        "package_version": __version__,
        "convention_version": CONVENTION_VERSION,
        "config": result.config.to_dict(),
        "chi_eff": result.chi_eff,
        "chi_eff_fitted": result.chi_eff_fitted,
        "rows": len(result.rows),
        "csv_sha256": hashlib.sha256(csv_bytes).hexdigest(),
        "timings": result.timings,
        "benchmark": [
            None if r.bench is None else {"re_alpha": r.re_alpha, **r.bench.as_dict()}
            for r in result.rows
        ],
    }


def _write(path: Path, data: bytes):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_outputs(result: SweepResult, out_dir) -> dict:
    """Write ``sweep.csv``, ``manifest.json`` and ``plot/``; returns the written paths."""
    if not result.rows:
        raise ContractError("refusing to emit outputs for an empty sweep")
    out = Path(out_dir)
    csv_bytes = csv_text(result.rows).encode("ascii")
    paths = {"csv": out / "sweep.csv", "manifest": out / "manifest.json"}
    _write(paths["csv"], csv_bytes)
    _write(
        paths["manifest"],
        (json.dumps(manifest(result, csv_bytes), indent=2, sort_keys=True) + "\n").encode("utf-8"),
    )
    series = plot_series(result)
    plot_dir = out / "plot"
    for stem, pts in series.items():
        text = "".join(f"{_fmt(a)} {_fmt(v)}\n" for a, v in pts)
        p = plot_dir / f"{stem}.dat"
        _write(p, text.encode("ascii"))
        paths[stem] = p
    script = plot_dir / "plot_sweep.py"
    _write(script, _PLOT_SCRIPT.format(stems=sorted(series)).encode("utf-8"))
    paths["plot_script"] = script
    return paths
