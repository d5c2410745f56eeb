"""Equal-time phonon correlations and steady-state detuning scans.

The n-th order equal-time correlation of the phonon mode,

    g^(n) = <b†^n b^n> / <b†b>^n,

is evaluated from the phonon number distribution through falling
factorial moments, which is exact for the diagonal observables involved
and cheap at any truncation.  Values far above one at a multiphonon
resonance signal bundle statistics; the n-phonon resonance itself shows
up as a local dip of g^(2) (and a peak of the occupation) between two
flanking maxima, which is what the map ridge extraction uses.

Scan points are independent steady-state solves, so scans can fan out
over processes; results are bitwise independent of the worker count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BundleSimError, UndefinedCorrelation
from .model import SystemParams, jump_channels, rotating_hamiltonian
from .operators import HilbertConfig
from .spectra import resonance_detuning
from . import dynamics

OCCUPATION_FLOOR = 1e-12


def phonon_populations(h: HilbertConfig, rho: np.ndarray) -> np.ndarray:
    """Phonon number distribution traced over the emitter."""
    diag = np.diag(rho).real
    return diag[: h.dim_phonon] + diag[h.dim_phonon :]


def mean_occupation(h: HilbertConfig, rho: np.ndarray) -> float:
    pops = phonon_populations(h, rho)
    return float(np.arange(h.dim_phonon) @ pops)


def gn(h: HilbertConfig, rho: np.ndarray, n: int, floor: float = OCCUPATION_FLOOR) -> float:
    """Equal-time n-th order phonon correlation of a density matrix.

    Raises
    ------
    UndefinedCorrelation
        If the mean occupation is below ``floor``; the normalization
        ``<b†b>^n`` is then pure noise.
    """
    if n < 1:
        raise ValueError(f"correlation order must be >= 1, got {n}")
    pops = phonon_populations(h, rho)
    levels = np.arange(h.dim_phonon, dtype=float)
    mean = float(levels @ pops)
    if mean < floor:
        raise UndefinedCorrelation(
            f"mean phonon occupation {mean:.2e} is below the floor {floor:.1e}"
        )
    falling = levels.copy()
    for k in range(1, n):
        falling *= levels - k
    return float(falling @ pops) / mean**n


@dataclass(frozen=True)
class CorrelationScan:
    """Steady-state occupation and correlations along a detuning grid.

    ``gvalues[k, j]`` is g^(orders[j]) at ``deltas[k]``; undefined or
    failed points hold NaN and leave a ``(delta, kind, message)`` entry
    in ``errors``.
    """

    deltas: np.ndarray
    orders: tuple[int, ...]
    nb: np.ndarray
    gvalues: np.ndarray
    errors: list[tuple[float, str, str]]


def _scan_point(
    p: SystemParams, h: HilbertConfig, delta: float, orders: tuple[int, ...], leak_tol: float
) -> tuple[float, tuple[float, ...], list[tuple[float, str, str]]]:
    p_at = dataclasses.replace(p, delta=delta)
    errors: list[tuple[float, str, str]] = []
    try:
        rho = dynamics.steady_state(
            h, rotating_hamiltonian(p_at, h), jump_channels(p_at, h), leak_tol=leak_tol
        )
    except BundleSimError as exc:
        errors.append((delta, type(exc).__name__, str(exc)))
        return np.nan, tuple(np.nan for _ in orders), errors
    nb = mean_occupation(h, rho)
    values = []
    for order in orders:
        try:
            values.append(gn(h, rho, order))
        except UndefinedCorrelation as exc:
            errors.append((delta, "UndefinedCorrelation", str(exc)))
            values.append(np.nan)
    return nb, tuple(values), errors


def detuning_scan(
    p: SystemParams,
    h: HilbertConfig,
    deltas: np.ndarray,
    orders: tuple[int, ...] = (2, 3),
    leak_tol: float = 1e-6,
    workers: int | None = None,
) -> CorrelationScan:
    """Steady-state correlation scan over a detuning grid.

    Each grid point is an independent steady-state solve; points that
    fail (truncation leak, undefined correlation, singular solve) are
    recorded in ``errors`` and reported as NaN instead of aborting the
    scan.  ``workers`` > 1 fans the points out over processes.
    """
    deltas = np.asarray(deltas, dtype=float)
    args = [(p, h, float(d), tuple(orders), leak_tol) for d in deltas]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, *zip(*args), chunksize=8))
    else:
        results = [_scan_point(*a) for a in args]
    nb = np.array([r[0] for r in results])
    gvalues = np.array([r[1] for r in results])
    errors: list[tuple[float, str, str]] = []
    for r in results:
        errors.extend(r[2])
    return CorrelationScan(
        deltas=deltas, orders=tuple(orders), nb=nb, gvalues=gvalues, errors=errors
    )


@dataclass(frozen=True)
class ResonanceMap:
    """g^(2) landscape over (axis parameter, detuning) with ridge tracking.

    The ridge is the detuning of maximum steady-state occupation per
    row, which for these systems coincides with the local g^(2) dip that
    marks the n-phonon resonance.  ``ridge_analytic`` carries the
    leading-order prediction for the reference regime; rows where no
    analytic resonance exists hold NaN there.
    """

    axis: str
    axis_values: np.ndarray
    deltas: np.ndarray
    nb: np.ndarray
    g2: np.ndarray
    ridge_deltas: np.ndarray
    ridge_analytic: np.ndarray
    errors: list[tuple[float, str, str]]


def resonance_map(
    p: SystemParams,
    h: HilbertConfig,
    axis: str,
    axis_values: np.ndarray,
    deltas: np.ndarray,
    order: int = 2,
    regime_reference: str = "strong_coupling",
    leak_tol: float = 1e-6,
    workers: int | None = None,
) -> ResonanceMap:
    """Map g^(2) over a parameter axis crossed with a detuning grid.

    ``axis`` is the SystemParams field to sweep (``"lam"`` or
    ``"omega_drive"``).  Each row reuses :func:`detuning_scan`.
    """
    if axis not in ("lam", "omega_drive"):
        raise ValueError(f"axis must be 'lam' or 'omega_drive', got {axis!r}")
    axis_values = np.asarray(axis_values, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    nb = np.empty((axis_values.size, deltas.size))
    g2 = np.empty_like(nb)
    ridge = np.empty(axis_values.size)
    ridge_ref = np.empty(axis_values.size)
    errors: list[tuple[float, str, str]] = []
    for i, value in enumerate(axis_values):
        p_row = dataclasses.replace(p, **{axis: float(value)})
        scan = detuning_scan(
            p_row, h, deltas, orders=(order,), leak_tol=leak_tol, workers=workers
        )
        nb[i] = scan.nb
        g2[i] = scan.gvalues[:, 0]
        errors.extend(scan.errors)
        if np.all(np.isnan(scan.nb)):
            ridge[i] = np.nan
        else:
            ridge[i] = deltas[np.nanargmax(scan.nb)]
        try:
            ridge_ref[i] = resonance_detuning(order, regime_reference, p_row)
        except BundleSimError as exc:
            ridge_ref[i] = np.nan
            errors.append((float(value), type(exc).__name__, str(exc)))
    return ResonanceMap(
        axis=axis,
        axis_values=axis_values,
        deltas=deltas,
        nb=nb,
        g2=g2,
        ridge_deltas=ridge,
        ridge_analytic=ridge_ref,
        errors=errors,
    )
