"""Command-line driver: config files in, CSV tables and a manifest out.

Usage::

    bundle-sim <kind> --config config.yaml [--out DIR] [--seed N] [--workers N]

where ``<kind>`` is one of ``rabi``, ``scan``, ``map``, ``trajectories``,
``purity``, ``purity-map`` and must match ``experiment.kind`` in the
config.  The config is a single YAML file with a fixed schema; unknown
keys anywhere are a hard error, so typos cannot silently fall back to
defaults.  Every run writes only inside its output directory and ends
with ``manifest.json`` recording the parsed config, resolved derived
values (detunings, gaps, windows), SHA-256 checksums of every table
written, normalized warnings, and the wall time.

Exit codes: 0 success (possibly with warnings), 1 configuration error,
2 numerical failure (truncation leak, singular solve, no resonance...),
3 statistics below target in a run that set ``require_convergence``.

Config schema (YAML types; defaults in parentheses)::

    params:                     # all optional
      omega_b: float (1.0)      # phonon frequency, sets the unit system
      delta: float (0.0)        # laser detuning omega_sigma - omega_laser
      lambda: float (0.0)       # emitter-phonon coupling
      omega_drive: float (0.0)  # drive amplitude
      kappa: float (0.0)        # phonon loss rate
      gamma: float (0.0)        # emitter decay rate
      gamma_phi: float (0.0)    # pure dephasing rate
      omega_b_physical: float or null (null)   # omega_b / 2 pi in Hz
    hilbert:
      n_max: int                # optional; default depends on the kind
    tolerances:
      leak: float (1e-6)
    seed: int (2024)
    workers: int (available cores)   # never changes results, only wall time
    output_dir: str ("out")
    experiment:
      kind: rabi | scan | map | trajectories | purity | purity_map
      ... kind-specific keys, see the _EXPERIMENT_KEYS table below.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
import warnings as _warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import (
    BundleSimError,
    ConfigError,
    InsufficientStatistics,
)
from .model import SystemParams, jump_channels, physical_rate, rotating_hamiltonian
from .operators import HilbertConfig, default_n_max, tensor_basis_state
from .spectra import REGIMES, predict_rabi
from . import correlations, dynamics, trajectories

_PARAM_KEYS = {
    "omega_b": 1.0,
    "delta": 0.0,
    "lambda": 0.0,
    "omega_drive": 0.0,
    "kappa": 0.0,
    "gamma": 0.0,
    "gamma_phi": 0.0,
    "omega_b_physical": None,
}

_TOP_KEYS = ("params", "hilbert", "tolerances", "seed", "workers", "output_dir", "experiment")

# required=... marks keys with no default
_REQUIRED = object()

_EXPERIMENT_KEYS: dict[str, dict[str, object]] = {
    "rabi": {
        "n": _REQUIRED,
        "regime": _REQUIRED,
        "refine": False,
        "delta": None,
        "frame": "bare",
        "periods": 2.2,
        "t_end": None,
        "n_steps": 2000,
        "master": False,
    },
    "scan": {
        "delta_min": _REQUIRED,
        "delta_max": _REQUIRED,
        "n_points": 400,
        "orders": [2, 3],
    },
    "map": {
        "axis": _REQUIRED,
        "axis_min": _REQUIRED,
        "axis_max": _REQUIRED,
        "axis_points": _REQUIRED,
        "delta_min": _REQUIRED,
        "delta_max": _REQUIRED,
        "delta_points": _REQUIRED,
        "order": 2,
        "regime_reference": "strong_coupling",
    },
    "trajectories": {
        "n": 2,
        "regime": "strong_driving",
        "refine": True,
        "delta": None,
        "n_traj": _REQUIRED,
        "duration": _REQUIRED,
        "gap": None,
    },
    "purity": {
        "n": _REQUIRED,
        "regime": "strong_driving",
        "refine": True,
        "delta": None,
        "n_traj": _REQUIRED,
        "duration": _REQUIRED,
        "window": None,
        "n_windows": 200000,
        "target_stderr": 0.01,
        "require_convergence": False,
    },
    "purity_map": {
        "n": _REQUIRED,
        "regime": "strong_driving",
        "refine": True,
        "lam_values": _REQUIRED,
        "kappa_values": _REQUIRED,
        "n_traj": _REQUIRED,
        "duration": _REQUIRED,
        "window": None,
        "n_windows": 100000,
        "target_stderr": 0.01,
        "require_convergence": False,
    },
}


def _fail(msg: str) -> ConfigError:
    return ConfigError(msg)


def _check_unknown(section: dict, allowed, context: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise _fail(f"unknown {context} keys: {', '.join(unknown)}")


def _as_float(value, key: str, optional: bool = False) -> float | None:
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(f"{key} must be an integer, got {value!r}")
    return value


def _as_bool(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise _fail(f"{key} must be true or false, got {value!r}")
    return value


def load_config(path: str | Path) -> dict:
    """Parse and validate a run configuration file (fail-closed)."""
    path = Path(path)
    if not path.is_file():
        raise _fail(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise _fail(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise _fail("config must be a mapping at the top level")
    _check_unknown(raw, _TOP_KEYS, "top-level")
    if "experiment" not in raw:
        raise _fail("config needs an 'experiment' section")

    params_raw = raw.get("params") or {}
    if not isinstance(params_raw, dict):
        raise _fail("'params' must be a mapping")
    _check_unknown(params_raw, _PARAM_KEYS, "params")
    params = {}
    for key, default in _PARAM_KEYS.items():
        params[key] = _as_float(
            params_raw.get(key, default), f"params.{key}", optional=(key == "omega_b_physical")
        )

    hilbert_raw = raw.get("hilbert") or {}
    if not isinstance(hilbert_raw, dict):
        raise _fail("'hilbert' must be a mapping")
    _check_unknown(hilbert_raw, ("n_max",), "hilbert")
    n_max = _as_int(hilbert_raw["n_max"], "hilbert.n_max") if "n_max" in hilbert_raw else None

    tol_raw = raw.get("tolerances") or {}
    if not isinstance(tol_raw, dict):
        raise _fail("'tolerances' must be a mapping")
    _check_unknown(tol_raw, ("leak",), "tolerances")
    leak_tol = _as_float(tol_raw.get("leak", 1e-6), "tolerances.leak")

    exp_raw = raw["experiment"]
    if not isinstance(exp_raw, dict):
        raise _fail("'experiment' must be a mapping")
    kind = exp_raw.get("kind")
    if kind not in _EXPERIMENT_KEYS:
        raise _fail(
            f"experiment.kind must be one of {sorted(_EXPERIMENT_KEYS)}, got {kind!r}"
        )
    schema = _EXPERIMENT_KEYS[kind]
    _check_unknown(exp_raw, set(schema) | {"kind"}, f"experiment ({kind})")
    experiment = {"kind": kind}
    for key, default in schema.items():
        if key in exp_raw:
            experiment[key] = exp_raw[key]
        elif default is _REQUIRED:
            raise _fail(f"experiment.{key} is required for kind {kind!r}")
        else:
            experiment[key] = default

    workers = raw.get("workers")
    if workers is None:
        workers = os.cpu_count() or 1
    return {
        "params": params,
        "n_max": n_max,
        "leak_tol": leak_tol,
        "seed": _as_int(raw.get("seed", 2024), "seed"),
        "workers": _as_int(workers, "workers"),
        "output_dir": raw.get("output_dir", "out"),
        "experiment": experiment,
    }


def _system_params(cfg: dict, delta: float | None = None) -> SystemParams:
    p = cfg["params"]
    return SystemParams(
        omega_b=p["omega_b"],
        delta=p["delta"] if delta is None else delta,
        lam=p["lambda"],
        omega_drive=p["omega_drive"],
        kappa=p["kappa"],
        gamma=p["gamma"],
        gamma_phi=p["gamma_phi"],
        omega_b_physical=p["omega_b_physical"],
    )


def _fmt(value) -> str:
    """CSV cell formatting; undefined values become empty fields."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.12g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_errors(outdir: Path, errors: list[tuple[float, str, str]], context: str) -> None:
    _write_csv(
        outdir / "errors.csv",
        ["context", "value", "error"],
        [(context, value, f"{kind}: {message}") for value, kind, message in errors],
    )


def _resolve_resonance(exp: dict, cfg: dict) -> tuple[float, dict]:
    """Detuning for a trajectory-style run plus bookkeeping for the manifest."""
    n = _as_int(exp["n"], "experiment.n")
    regime = exp["regime"]
    if regime not in REGIMES:
        raise _fail(f"experiment.regime must be one of {REGIMES}, got {regime!r}")
    p0 = _system_params(cfg)
    explicit = _as_float(exp.get("delta"), "experiment.delta", optional=True)
    pred = predict_rabi(n, regime, p0, refine=_as_bool(exp["refine"], "experiment.refine"))
    delta = explicit if explicit is not None else pred.delta_used
    resolved = {
        "n": n,
        "regime": regime,
        "delta_resonance": pred.delta_resonance,
        "delta_used": delta,
        "omega_eff": pred.omega_eff,
        "period": pred.period,
    }
    return delta, resolved


def _hilbert(cfg: dict, fallback_n_max: int) -> HilbertConfig:
    return HilbertConfig(cfg["n_max"] if cfg["n_max"] is not None else fallback_n_max)


def run_rabi(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    delta, resolved = _resolve_resonance(exp, cfg)
    n = resolved["n"]
    p = _system_params(cfg, delta=delta)
    h = _hilbert(cfg, default_n_max(n))
    frame = exp["frame"]
    if frame not in dynamics.FRAMES:
        raise _fail(f"experiment.frame must be one of {dynamics.FRAMES}, got {frame!r}")
    t_end = _as_float(exp.get("t_end"), "experiment.t_end", optional=True)
    if t_end is None:
        periods = _as_float(exp["periods"], "experiment.periods")
        if not math.isfinite(resolved["period"]):
            raise _fail(
                "experiment.t_end is required when the predicted period is infinite "
                "(omega_eff = 0)"
            )
        t_end = periods * resolved["period"]
    grid = dynamics.TimeGrid(t_end=t_end, n_steps=_as_int(exp["n_steps"], "experiment.n_steps"))
    psi0 = tensor_basis_state(h, 0, "v")
    ham = rotating_hamiltonian(p, h)
    if _as_bool(exp["master"], "experiment.master"):
        states = dynamics.evolve_master(
            h, ham, jump_channels(p, h), psi0, grid, leak_tol=cfg["leak_tol"]
        )
    else:
        states = dynamics.evolve_schrodinger(h, ham, psi0, grid, leak_tol=cfg["leak_tol"])
    trace = dynamics.project_populations(h, grid.times, states, frame=frame, p=p)
    _write_csv(
        outdir / "populations.csv",
        ["t"] + [f"P({label})" for label in trace.labels],
        (
            [trace.times[k]] + list(trace.values[k])
            for k in range(trace.times.size)
        ),
    )
    _write_csv(
        outdir / "prediction.csv",
        ["n", "regime", "omega_eff", "delta_resonance", "delta_used", "period"],
        [
            (
                n,
                resolved["regime"],
                resolved["omega_eff"],
                resolved["delta_resonance"],
                resolved["delta_used"],
                resolved["period"],
            )
        ],
    )
    resolved["frame"] = frame
    resolved["t_end"] = t_end
    return resolved


def run_scan(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    orders = exp["orders"]
    if (
        not isinstance(orders, list)
        or not orders
        or any(isinstance(o, bool) or not isinstance(o, int) or o < 1 for o in orders)
    ):
        raise _fail(f"experiment.orders must be a list of positive integers, got {orders!r}")
    n_points = _as_int(exp["n_points"], "experiment.n_points")
    if n_points < 2:
        raise _fail(f"experiment.n_points must be >= 2, got {n_points}")
    deltas = np.linspace(
        _as_float(exp["delta_min"], "experiment.delta_min"),
        _as_float(exp["delta_max"], "experiment.delta_max"),
        n_points,
    )
    p = _system_params(cfg)
    h = _hilbert(cfg, 3 * max(orders) + 3)
    scan = correlations.detuning_scan(
        p, h, deltas, orders=tuple(orders), leak_tol=cfg["leak_tol"], workers=cfg["workers"]
    )
    _write_csv(
        outdir / "scan.csv",
        ["delta", "nb"] + [f"g{o}" for o in scan.orders],
        (
            [scan.deltas[k], scan.nb[k]] + list(scan.gvalues[k])
            for k in range(scan.deltas.size)
        ),
    )
    _write_errors(outdir, scan.errors, "delta")
    return {"n_points": n_points, "orders": list(scan.orders), "n_errors": len(scan.errors)}


def run_map(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    axis = exp["axis"]
    if axis == "lambda":
        axis = "lam"  # config files use the physics name
    if axis not in ("lam", "omega_drive"):
        raise _fail(f"experiment.axis must be 'lambda' or 'omega_drive', got {exp['axis']!r}")
    axis_values = np.linspace(
        _as_float(exp["axis_min"], "experiment.axis_min"),
        _as_float(exp["axis_max"], "experiment.axis_max"),
        _as_int(exp["axis_points"], "experiment.axis_points"),
    )
    deltas = np.linspace(
        _as_float(exp["delta_min"], "experiment.delta_min"),
        _as_float(exp["delta_max"], "experiment.delta_max"),
        _as_int(exp["delta_points"], "experiment.delta_points"),
    )
    order = _as_int(exp["order"], "experiment.order")
    regime_reference = exp["regime_reference"]
    if regime_reference not in REGIMES:
        raise _fail(
            f"experiment.regime_reference must be one of {REGIMES}, got {regime_reference!r}"
        )
    p = _system_params(cfg)
    h = _hilbert(cfg, 3 * order + 3)
    result = correlations.resonance_map(
        p,
        h,
        axis,
        axis_values,
        deltas,
        order=order,
        regime_reference=regime_reference,
        leak_tol=cfg["leak_tol"],
        workers=cfg["workers"],
    )
    _write_csv(
        outdir / "map.csv",
        ["axis_value", "delta", "g2"],
        (
            [result.axis_values[i], result.deltas[j], result.g2[i, j]]
            for i in range(result.axis_values.size)
            for j in range(result.deltas.size)
        ),
    )
    _write_csv(
        outdir / "ridge.csv",
        ["axis_value", "delta_ridge", "delta_analytic"],
        (
            [result.axis_values[i], result.ridge_deltas[i], result.ridge_analytic[i]]
            for i in range(result.axis_values.size)
        ),
    )
    _write_errors(outdir, result.errors, axis)
    return {"axis": axis, "order": order, "n_errors": len(result.errors)}


def _run_ensemble_for(cfg: dict, delta: float, n: int) -> tuple:
    exp = cfg["experiment"]
    p = _system_params(cfg, delta=delta)
    h = _hilbert(cfg, default_n_max(n))
    psi0 = tensor_basis_state(h, 0, "v")
    ensemble = trajectories.run_ensemble(
        h,
        rotating_hamiltonian(p, h),
        jump_channels(p, h),
        psi0,
        duration=_as_float(exp["duration"], "experiment.duration"),
        n_traj=_as_int(exp["n_traj"], "experiment.n_traj"),
        seed=cfg["seed"],
        leak_tol=cfg["leak_tol"],
        workers=cfg["workers"],
    )
    return p, h, ensemble


def run_trajectories(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    delta, resolved = _resolve_resonance(exp, cfg)
    p, _h, ensemble = _run_ensemble_for(cfg, delta, resolved["n"])
    gap = _as_float(exp.get("gap"), "experiment.gap", optional=True)
    if gap is None:
        if p.kappa <= 0:
            raise _fail("experiment.gap is required when kappa is zero")
        gap = 5.0 / p.kappa
    _write_csv(
        outdir / "clicks.csv",
        ["trajectory", "t", "channel"],
        (
            [traj.index, click.t, click.channel]
            for traj in ensemble
            for click in traj.clicks
        ),
    )
    _write_csv(
        outdir / "bundles.csv",
        ["trajectory", "t_first", "t_last", "size"],
        (
            [traj.index, b.t_first, b.t_last, b.size]
            for traj in ensemble
            for b in trajectories.group_bundles(traj.clicks, gap)
        ),
    )
    # histogram at the chosen gap plus a grouping-gap sensitivity set
    gaps = []
    if p.kappa > 0:
        gaps = [2.0 / p.kappa, 5.0 / p.kappa, 10.0 / p.kappa]
    if not any(math.isclose(gap, g) for g in gaps):
        gaps.append(gap)
    rows = []
    for g in sorted(gaps):
        stats = trajectories.bundle_statistics(ensemble, g, p=p)
        total = stats.n_bundles
        for size, count in stats.counts.items():
            rows.append(
                [
                    g,
                    size,
                    count,
                    count / total if total else math.nan,
                    stats.rates_internal[size],
                    stats.rates_physical[size] if stats.rates_physical else None,
                ]
            )
    _write_csv(
        outdir / "histogram.csv",
        ["gap", "size", "count", "fraction", "rate_internal", "rate_physical"],
        rows,
    )
    stats = trajectories.bundle_statistics(ensemble, gap, p=p)
    resolved.update(
        {
            "gap": gap,
            "n_phonon_clicks": stats.n_phonon_clicks,
            "n_bundles": stats.n_bundles,
            "click_rate_internal": stats.click_rate_internal,
        }
    )
    return resolved


def _purity_row(cfg: dict, delta: float, n: int, window: float | None):
    """Run the ensemble for one purity point and estimate its purity.

    Returns ``(estimate, converged)``; a non-converged estimate is the
    partial result carried by InsufficientStatistics.
    """
    exp = cfg["experiment"]
    p, _h, ensemble = _run_ensemble_for(cfg, delta, n)
    if window is None:
        if p.kappa <= 0:
            raise _fail("experiment.window is required when kappa is zero")
        window = 5.0 / p.kappa
    try:
        estimate = trajectories.estimate_purity(
            ensemble,
            n_target=n,
            window=window,
            n_windows=_as_int(exp["n_windows"], "experiment.n_windows"),
            seed=cfg["seed"] + 1,  # window sampling independent of trajectory noise
            target_stderr=_as_float(exp["target_stderr"], "experiment.target_stderr"),
        )
    except InsufficientStatistics as exc:
        _warnings.warn(str(exc), UserWarning, stacklevel=1)
        return exc.estimate, False
    return estimate, True


def _purity_csv_row(est, n: int, window, n_windows) -> list:
    if est is None:
        return [n, window, n_windows, 0] + [math.nan] * (n + 3)
    return (
        [est.n_target, est.window, est.n_windows, est.n_nonempty]
        + list(est.p_bar)
        + [est.purity, est.stderr, est.overflow_fraction]
    )


def run_purity(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    delta, resolved = _resolve_resonance(exp, cfg)
    n = resolved["n"]
    window = _as_float(exp.get("window"), "experiment.window", optional=True)
    est, converged = _purity_row(cfg, delta, n, window)
    header = (
        ["n_target", "window", "n_windows", "n_nonempty"]
        + [f"p_bar_{k}" for k in range(1, n + 1)]
        + ["purity", "stderr", "overflow_fraction"]
    )
    _write_csv(outdir / "purity.csv", header, [_purity_csv_row(est, n, window, exp["n_windows"])])
    resolved["converged"] = converged
    if est is not None:
        resolved.update({"window": est.window, "purity": est.purity, "stderr": est.stderr})
    if not converged and _as_bool(
        exp["require_convergence"], "experiment.require_convergence"
    ):
        raise InsufficientStatistics("purity did not converge (require_convergence set)")
    return resolved


def run_purity_map(cfg: dict, outdir: Path) -> dict:
    exp = cfg["experiment"]
    n = _as_int(exp["n"], "experiment.n")
    regime = exp["regime"]
    if regime not in REGIMES:
        raise _fail(f"experiment.regime must be one of {REGIMES}, got {regime!r}")
    lam_values = exp["lam_values"]
    kappa_values = exp["kappa_values"]
    for name, values in (("lam_values", lam_values), ("kappa_values", kappa_values)):
        if not isinstance(values, list) or not values:
            raise _fail(f"experiment.{name} must be a non-empty list of numbers")
    window_cfg = _as_float(exp.get("window"), "experiment.window", optional=True)
    refine = _as_bool(exp["refine"], "experiment.refine")
    rows = []
    n_failed = 0
    for lam in lam_values:
        lam = _as_float(lam, "experiment.lam_values[]")
        for kappa in kappa_values:
            kappa = _as_float(kappa, "experiment.kappa_values[]")
            point_cfg = dict(cfg)
            point_cfg["params"] = dict(cfg["params"], **{"lambda": lam, "kappa": kappa})
            pred = predict_rabi(n, regime, _system_params(point_cfg), refine=refine)
            window = window_cfg if window_cfg is not None else 5.0 / kappa
            try:
                est, converged = _purity_row(point_cfg, pred.delta_used, n, window)
            except BundleSimError as exc:
                n_failed += 1
                _warnings.warn(
                    f"purity point lambda={lam}, kappa={kappa} failed: {exc}",
                    UserWarning,
                    stacklevel=1,
                )
                rows.append([lam, kappa, pred.delta_used, math.nan, math.nan, math.nan])
                continue
            if not converged:
                n_failed += 1
            if est is None:
                rows.append([lam, kappa, pred.delta_used, math.nan, math.nan, math.nan])
            else:
                rows.append(
                    [lam, kappa, pred.delta_used, est.purity, est.stderr, est.overflow_fraction]
                )
    _write_csv(
        outdir / "purity_map.csv",
        ["lambda", "kappa", "delta_used", "purity", "stderr", "overflow_fraction"],
        rows,
    )
    if n_failed and _as_bool(exp["require_convergence"], "experiment.require_convergence"):
        raise InsufficientStatistics(f"{n_failed} purity map points failed")
    return {"n": n, "regime": regime, "n_points": len(rows), "n_failed": n_failed}


_RUNNERS = {
    "rabi": run_rabi,
    "scan": run_scan,
    "map": run_map,
    "trajectories": run_trajectories,
    "purity": run_purity,
    "purity_map": run_purity_map,
}


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_manifest(
    outdir: Path,
    cfg: dict,
    kind: str,
    resolved: dict | None,
    warning_messages: list[str],
    error: str | None,
    wall_time: float,
) -> None:
    files = {
        f.name: _sha256(f)
        for f in sorted(outdir.iterdir())
        if f.is_file() and f.suffix == ".csv"
    }
    manifest = {
        "tool": "bundle-sim",
        "version": __version__,
        "kind": kind,
        "config": {k: cfg[k] for k in ("params", "n_max", "leak_tol", "seed", "workers")},
        "experiment": cfg["experiment"],
        "resolved": resolved,
        "files": files,
        "warnings": warning_messages,
        "error": error,
        "wall_time_s": round(wall_time, 3),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bundle-sim",
        description="Multiphonon bundle emission: spectra, scans, and click statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ("rabi", "scan", "map", "trajectories", "purity", "purity-map"):
        sp = sub.add_parser(command)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--workers", type=int, help="process count (overrides config)")
    args = parser.parse_args(argv)
    kind = args.command.replace("-", "_")

    try:
        cfg = load_config(args.config)
        if cfg["experiment"]["kind"] != kind:
            raise _fail(
                f"config is for kind {cfg['experiment']['kind']!r} but the "
                f"{args.command!r} command was invoked"
            )
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            cfg["workers"] = args.workers
        outdir = Path(args.out if args.out is not None else cfg["output_dir"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    resolved = None
    error = None
    status = 0
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        try:
            resolved = _RUNNERS[kind](cfg, outdir)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        except InsufficientStatistics as exc:
            error = f"InsufficientStatistics: {exc}"
            status = 3
        except BundleSimError as exc:
            error = f"{type(exc).__name__}: {exc}"
            status = 2
    messages = [str(w.message) for w in caught]
    _write_manifest(
        outdir, cfg, kind, resolved, messages, error, time.perf_counter() - start
    )
    if error is not None:
        print(error, file=sys.stderr)
    for message in messages:
        print(f"warning: {message}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
