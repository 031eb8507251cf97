"""Batch front end.

Usage::

    wave-sim <mode> --config run.cfg [--K 50] [--N 50] [--T 20] [--sweeps 5]
                    [--out results] [--emit-surfaces]

The config file holds one ``key = value`` per line; ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .discretization import build_grid, discretize_initial
from .model import DataKind, PotentialParams, ProblemSpec, check_hypotheses, example_spec
from .timestepper import run_simulation
from .verification import (
    TABLE1_STEPS,
    error_norms,
    reproduce_table2,
    surface_data,
    table1_from,
)

MODES = ("simulate", "verify", "analyze-decay", "analyze-blowup", "check-hypotheses")
EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS = 0, 1, 2
NORM_CAP = 1e6

# thresholds quoted for the worked example
RHO_BOUND = 1.563e-3
E0_BOUND = 0.015
E_STAR_BOUND = 0.017


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "simulate"
    spec: ProblemSpec = field(default_factory=example_spec)
    K: int = 50
    N: int = 50
    T: float = 20.0
    sweeps: int = 5
    tol: float | None = None
    xi: float | None = None
    epsilon: float = 1e-3
    delta: float | None = None
    c_bar: float | None = None
    out_dir: Path = Path("out")
    emit_surfaces: bool = False
    table2_sizes: tuple[int, ...] = (50, 100, 150, 200)
    fit_window: tuple[float, float] = (2.0, 18.0)
    scan_scales: tuple[float, ...] | None = None

    def blowup_params(self) -> diag.BlowupParams:
        if self.xi is None:
            return diag.BlowupParams.default(self.spec, self.epsilon, self.c_bar)
        return diag.BlowupParams(self.xi, self.epsilon, self.c_bar)


_SPEC_FLOATS = ("lambda1", "lambda2", "mu1", "mu2", "k1", "k2",
                "p1", "p2", "q1", "q2", "r1", "r2")
_POTENTIAL_FLOATS = tuple(f.name for f in fields(PotentialParams))
_KEYS = {
    "mode", "K", "N", "T", "sweeps", "tol", "xi", "epsilon", "delta", "c_bar",
    "out_dir", "emit_surfaces", "table2_sizes", "fit_lo", "fit_hi", "scan_scales",
    "sources", "forcing", "initial_data", *_SPEC_FLOATS, *_POTENTIAL_FLOATS,
}


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    x = float(text)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {text!r}")
    return x


def _float_range(text: str) -> tuple[float, ...]:
    # lo:hi:step, hi exclusive
    lo, hi, step = (_float(p) for p in text.split(":"))
    if step <= 0 or hi <= lo:
        raise ValueError("scan range needs lo < hi and step > 0")
    return tuple(float(s) for s in np.arange(lo, hi, step))


_PARSERS = {
    "K": _int, "N": _int, "sweeps": _int, "T": _float, "tol": _float, "xi": _float,
    "epsilon": _float, "delta": _float, "c_bar": _float, "fit_lo": _float, "fit_hi": _float,
    "emit_surfaces": _bool, "sources": _bool, "mode": str, "out_dir": str,
    "forcing": DataKind.parse, "initial_data": DataKind.parse,
    "table2_sizes": lambda s: tuple(_int(p) for p in s.replace(",", " ").split()),
    "scan_scales": _float_range,
    **{k: _float for k in _SPEC_FLOATS + _POTENTIAL_FLOATS},
}


def read_pairs(text: str) -> dict[str, object]:
    """Parse ``key = value`` lines into typed values."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return out


def build_config(values: dict[str, object]) -> RunConfig:
    """Validate typed key/value pairs and assemble a RunConfig."""
    v = dict(values)
    mode = v.pop("mode", "simulate")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {mode!r}")

    pot_kw = {k: v.pop(k) for k in _POTENTIAL_FLOATS if k in v}
    sources = v.pop("sources", True)
    if not sources and pot_kw:
        raise ConfigError("potential parameters given while sources = off")
    spec_kw = {k: v.pop(k) for k in _SPEC_FLOATS if k in v}
    for k in ("forcing", "initial_data"):
        if k in v:
            spec_kw[k] = v.pop(k)
    T = v.pop("T", 20.0)
    try:
        potential = PotentialParams(**pot_kw) if sources else None
        spec = ProblemSpec(potential=potential, horizon=T, **spec_kw)
        grid = build_grid(v.get("K", 50), v.get("N", 50), T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = RunConfig(mode=mode, spec=spec, K=grid.K, N=grid.N, T=grid.T)
    v.pop("K", None)
    v.pop("N", None)
    cfg.sweeps = v.pop("sweeps", 5)
    if cfg.sweeps < 1:
        raise ConfigError("sweeps must be >= 1")
    cfg.tol = v.pop("tol", None)
    if cfg.tol is not None and cfg.tol <= 0:
        raise ConfigError("tol must be > 0")
    cfg.xi = v.pop("xi", None)
    cfg.epsilon = v.pop("epsilon", 1e-3)
    cfg.delta = v.pop("delta", None)
    cfg.c_bar = v.pop("c_bar", None)
    try:
        bp = cfg.blowup_params()
        bp.validate_for(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.delta is not None and cfg.delta <= 0:
        raise ConfigError("delta must be > 0")
    cfg.out_dir = Path(v.pop("out_dir", "out"))
    cfg.emit_surfaces = v.pop("emit_surfaces", False)
    cfg.table2_sizes = v.pop("table2_sizes", cfg.table2_sizes)
    if not cfg.table2_sizes or min(cfg.table2_sizes) < 2:
        raise ConfigError("table2_sizes must list grid sizes >= 2")
    cfg.fit_window = (v.pop("fit_lo", 2.0), v.pop("fit_hi", 18.0))
    if not cfg.fit_window[0] < cfg.fit_window[1]:
        raise ConfigError("fit_lo must be < fit_hi")
    cfg.scan_scales = v.pop("scan_scales", None)
    assert not v, f"unhandled keys {sorted(v)}"
    _check_mode(cfg)
    return cfg


def _check_mode(cfg: RunConfig) -> None:
    if cfg.mode == "verify":
        ref = example_spec(horizon=cfg.spec.horizon)
        if cfg.spec != ref:
            raise ConfigError("verify needs the manufactured configuration "
                              "(default coefficients, sources on, manufactured forcing and data)")
        if cfg.K % 5:
            raise ConfigError(f"verify needs K divisible by 5 so that x = 4/5 is a node; got K = {cfg.K}")
        if cfg.N < max(TABLE1_STEPS):
            raise ConfigError(f"verify needs N >= {max(TABLE1_STEPS)}; got N = {cfg.N}")
    if cfg.mode == "analyze-decay":
        try:
            diag.p_star(cfg.spec.p1, cfg.spec.p2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def parse_config(text: str, overrides: dict[str, object] | None = None) -> RunConfig:
    """Parse config text; ``overrides`` (already typed) win over file values."""
    values = read_pairs(text)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - _KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    return build_config(values)


# --- output ----------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(c) for c in r])
    return buf.getvalue()


def summary_text(items) -> str:
    return "".join(f"{k}: {fmt(v)}\n" for k, v in items)


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file or none: stage in a temp dir, then move into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
        for name, text in files.items():
            (Path(tmp) / name).write_text(text, encoding="utf-8")
        for name in files:
            os.replace(Path(tmp) / name, out_dir / name)


ENERGY_HEADER = ("t", "E", "H", "I1", "I2", "J", "psi", "L", "Lyap")


def energy_rows(samples):
    return [(s.t, s.E, s.H, s.I1, s.I2, s.J, s.psi, s.L_blowup, s.Lyap) for s in samples]


def _surfaces(traj, grid, spec):
    surf = surface_data(traj, grid)
    if spec.initial_data != DataKind.manufactured() or spec.forcing != DataKind.manufactured():
        # no closed form outside the manufactured family
        surf.u_ex = np.full_like(surf.u, np.nan)
        surf.v_ex = np.full_like(surf.v, np.nan)
    return csv_text(("x", "t", "u", "v", "u_ex", "v_ex"), surf.rows())


def _run_params(cfg: RunConfig, diagnostics=None):
    items = [("mode", cfg.mode), ("K", cfg.K), ("N", cfg.N), ("T", cfg.T), ("sweeps", cfg.sweeps)]
    if diagnostics is not None:
        items += [("sweeps_done", diagnostics.sweeps),
                  ("last_sweep_delta", diagnostics.sweep_deltas[-1]),
                  ("final_residual", diagnostics.final_residual)]
    return items


# --- modes -----------------------------------------------------------------

def _simulate(cfg: RunConfig):
    grid = build_grid(cfg.K, cfg.N, cfg.T)
    traj, sd = run_simulation(cfg.spec, grid, cfg.sweeps, cfg.tol)
    samples = diag.energy_series(traj, cfg.spec, grid, cfg.blowup_params(), cfg.delta)
    return cfg, grid, traj, sd, samples


def mode_simulate(cfg: RunConfig):
    cfg, grid, traj, sd, samples = _simulate(cfg)
    files = {"energy.csv": csv_text(ENERGY_HEADER, energy_rows(samples))}
    if cfg.emit_surfaces:
        files["surfaces.csv"] = _surfaces(traj, grid, cfg.spec)
    items = _run_params(cfg, sd) + [("E_initial", samples[0].E), ("E_final", samples[-1].E)]
    files["summary.txt"] = summary_text(items)
    return EXIT_OK, files


def mode_verify(cfg: RunConfig):
    cfg, grid, traj, sd, samples = _simulate(cfg)
    rows = table1_from(traj, grid)
    t1 = csv_text(("field", "n", "t", "exact", "computed", "abs_err"),
                  [(r.field, r.n, r.t, r.exact, r.computed, r.abs_err) for r in rows])
    reports = reproduce_table2([(s, s) for s in cfg.table2_sizes], cfg.T, cfg.sweeps)
    t2 = csv_text(("K", "N", "T", "sweeps", "err_u", "err_v"),
                  [(r.K, r.N, r.T, r.sweeps, r.err_u, r.err_v) for r in reports])
    own = error_norms(traj, grid, cfg.sweeps)
    files = {"table1.csv": t1, "table2.csv": t2,
             "energy.csv": csv_text(ENERGY_HEADER, energy_rows(samples))}
    if cfg.emit_surfaces:
        files["surfaces.csv"] = _surfaces(traj, grid, cfg.spec)
    items = _run_params(cfg, sd) + [("err_u", own.err_u), ("err_v", own.err_v)]
    items += [(f"err_u_{r.K}", r.err_u) for r in reports]
    items += [(f"err_v_{r.K}", r.err_v) for r in reports]
    files["summary.txt"] = summary_text(items)
    return EXIT_OK, files


def mode_analyze_decay(cfg: RunConfig):
    cfg, grid, traj, sd, samples = _simulate(cfg)
    dc = diag.decay_constants(cfg.spec)
    lo, hi = cfg.fit_window
    items = _run_params(cfg, sd) + [
        ("rho", dc.rho), ("E0", dc.E0), ("E_star", dc.E_star),
        ("p_star", dc.p_star), ("eta_star", dc.eta_star), ("eta_star_below_1", dc.hypothesis_ok),
        ("I1_initial", samples[0].I1), ("I2_initial", samples[0].I2),
    ]
    ok = dc.hypothesis_ok and samples[0].I1 > 0 and samples[0].I2 > 0
    try:
        C, gamma, resid = diag.fit_decay_rate(samples, (lo, hi))
        items += [("fit_lo", lo), ("fit_hi", hi), ("fit_C", C), ("fit_gamma", gamma),
                  ("fit_residual", resid)]
    except ValueError as exc:
        items += [("fit_error", str(exc))]
    items.append(("hypotheses_ok", ok))
    files = {"energy.csv": csv_text(ENERGY_HEADER, energy_rows(samples)),
             "summary.txt": summary_text(items)}
    if cfg.emit_surfaces:
        files["surfaces.csv"] = _surfaces(traj, grid, cfg.spec)
    return (EXIT_OK if ok else EXIT_HYPOTHESIS), files


def mode_analyze_blowup(cfg: RunConfig):
    grid = build_grid(cfg.K, cfg.N, cfg.T)
    spec = cfg.spec
    items = [("mode", cfg.mode), ("K", cfg.K), ("N", cfg.N), ("T", cfg.T)]
    margin = diag.blowup_margin(spec)
    items.append(("blowup_margin", margin))
    if cfg.scan_scales is not None:
        scan = diag.scan_blowup_scale(spec, grid, cfg.scan_scales)
        items.append(("scan_scale", scan.scale))
        if scan.admissible:
            spec = replace(spec, initial_data=DataKind.scaled(scan.scale))
    s0 = diag.energy_sample(
        discretize_initial(spec, grid), 0.0, spec, grid, cfg.blowup_params(), cfg.delta)
    items += [("initial_data", spec.initial_data), ("H_initial", s0.H)]
    ok = margin > 0 and s0.H > 0
    items.append(("hypotheses_ok", ok))
    if not ok:
        return EXIT_HYPOTHESIS, {"summary.txt": summary_text(items)}

    cfg = replace(cfg, spec=spec)
    _, grid, traj, sd, samples = _simulate(cfg)
    amp = np.maximum(np.abs(traj.U).max(axis=1), np.abs(traj.V).max(axis=1))
    capped = np.nonzero(amp > NORM_CAP)[0]
    stop = int(capped[0]) if capped.size else len(samples)
    kept = samples[:stop]
    H = [s.H for s in kept]
    L = [s.L_blowup for s in kept]
    bad_H = diag.nondecreasing_violations(H)
    bad_L = diag.nondecreasing_violations(L) if all(x is not None for x in L) else [-1]
    t_star = diag.blowup_time_bound(s0.L_blowup, cfg.blowup_params())
    items = items[:-1] + [
        ("sweeps_done", sd.sweeps), ("last_sweep_delta", sd.sweep_deltas[-1]),
        ("final_residual", sd.final_residual),
        ("xi", cfg.blowup_params().xi), ("epsilon", cfg.epsilon),
        ("L_initial", s0.L_blowup), ("T_star_bound", t_star),
        ("samples_monitored", len(kept)), ("max_amplitude", float(amp[:stop].max())),
        ("H_monotone", not bad_H), ("L_monotone", not bad_L), ("hypotheses_ok", True),
    ]
    files = {"energy.csv": csv_text(ENERGY_HEADER, energy_rows(samples)),
             "summary.txt": summary_text(items)}
    if cfg.emit_surfaces:
        files["surfaces.csv"] = _surfaces(traj, grid, spec)
    return EXIT_OK, files


def hypothesis_items(spec: ProblemSpec):
    rep = check_hypotheses(spec)
    items = [(f.name, getattr(rep, f.name)) for f in fields(rep)]
    try:
        dc = diag.decay_constants(spec)
    except ValueError as exc:
        return items + [("decay_constants_error", str(exc))]
    items += [
        ("rho", dc.rho), ("E0", dc.E0), ("E_star", dc.E_star),
        ("p_star", dc.p_star), ("eta_star", dc.eta_star),
        ("rho_below_1.563e-3", dc.rho <= RHO_BOUND),
        ("E0_below_0.015", dc.E0 < E0_BOUND),
        ("E_star_below_0.017", dc.E_star < E_STAR_BOUND),
        ("eta_star_below_1", dc.hypothesis_ok),
    ]
    return items


def mode_check_hypotheses(cfg: RunConfig):
    return EXIT_OK, {"summary.txt": summary_text([("mode", cfg.mode)] + hypothesis_items(cfg.spec))}


DISPATCH = {
    "simulate": mode_simulate,
    "verify": mode_verify,
    "analyze-decay": mode_analyze_decay,
    "analyze-blowup": mode_analyze_blowup,
    "check-hypotheses": mode_check_hypotheses,
}


def run(config: RunConfig) -> int:
    try:
        code, files = DISPATCH[config.mode](config)
        write_outputs(config.out_dir, files)
    except Exception as exc:  # surfaced to the user with context, never partial output
        print(f"error ({config.mode}): {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(files["summary.txt"])
    return code


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wave-sim", description="Coupled damped wave solver.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, type=Path, help="key = value config file")
    p.add_argument("--K", type=int, help="spatial intervals")
    p.add_argument("--N", type=int, help="time steps")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--sweeps", type=int, help="Picard sweeps")
    p.add_argument("--out", help="output directory")
    p.add_argument("--emit-surfaces", action="store_true", default=None,
                   help="also write surfaces.csv")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {"mode": args.mode, "K": args.K, "N": args.N, "T": args.T,
                 "sweeps": args.sweeps, "out_dir": args.out, "emit_surfaces": args.emit_surfaces}
    try:
        text = args.config.read_text(encoding="utf-8")
        cfg = parse_config(text, overrides)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
