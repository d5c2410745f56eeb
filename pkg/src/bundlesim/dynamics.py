"""Closed and open time evolution, steady states, and frame projections.

Propagation strategy: the Hamiltonians here are small dense matrices (a
few tens of states), so instead of adaptive ODE stepping both
propagators use exact matrix decompositions.  The Schroedinger
propagator diagonalizes H once and applies exact phases at every
requested time; the master-equation propagator exponentiates the
Liouvillian once per (uniform) grid step and iterates.  Both are exact
at the grid times for any step size, which keeps long weak-drive runs
(millions of phonon periods) cheap and step-size independent.

Density matrices are vectorized row-major (C order), so
``vec(A rho B) = kron(A, B.T) vec(rho)``.

All propagators police truncation health: if the top phonon level of
either emitter block ever holds more population than ``leak_tol`` the
run aborts with :class:`~bundlesim.errors.TruncationLeak`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateDrive,
    IntegrationFailure,
    NoUniqueSteadyState,
    SolverFailure,
    TruncationLeak,
)
from .model import JumpChannel, SystemParams
from .operators import QD_LABELS, HilbertConfig, basis_labels, polaron_transform
from .spectra import dressed_product_state, dressed_states

FRAMES = ("bare", "displaced", "dressed")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid from 0 to ``t_end`` with ``n_steps`` steps."""

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class PopulationTrace:
    """Basis-state populations along a time grid.

    ``values[k, i]`` is the population of the state labelled
    ``labels[i]`` at ``times[k]``.
    """

    times: np.ndarray
    labels: list[str]
    values: np.ndarray


def _top_level_indices(h: HilbertConfig) -> list[int]:
    return [h.index(h.n_max, q) for q in QD_LABELS]


def _check_hermitian(m: np.ndarray, name: str) -> None:
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.conj().T).max() > 1e-10 * scale:
        raise ValueError(f"{name} must be Hermitian")


def evolve_schrodinger(
    h: HilbertConfig,
    hamiltonian: np.ndarray,
    psi0: np.ndarray,
    grid: TimeGrid,
    leak_tol: float = 1e-6,
) -> np.ndarray:
    """Closed-system evolution of ``psi0`` under a Hermitian Hamiltonian.

    Returns the state at every grid time, shape ``(n_steps + 1, dim)``.
    Exact (to roundoff) at each time regardless of the step size.
    """
    _check_hermitian(hamiltonian, "hamiltonian")
    psi0 = np.asarray(psi0, dtype=complex)
    norm0 = np.linalg.norm(psi0)
    if abs(norm0 - 1.0) > 1e-8:
        raise ValueError(f"psi0 must be normalized, got norm {norm0}")
    energies, vecs = np.linalg.eigh(hamiltonian)
    amps = vecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(grid.times, energies))
    states = (vecs @ (phases * amps).T).T
    norms = np.linalg.norm(states, axis=1)
    if np.abs(norms - 1.0).max() > 1e-9:
        raise IntegrationFailure(
            f"norm drifted by {np.abs(norms - 1.0).max():.2e} during closed evolution"
        )
    top = _top_level_indices(h)
    leak = (np.abs(states[:, top]) ** 2).sum(axis=1).max()
    if leak > leak_tol:
        raise TruncationLeak(
            f"top phonon level reached population {leak:.2e} > {leak_tol:.1e}; "
            f"raise n_max above {h.n_max}"
        )
    return states


def liouvillian(hamiltonian: np.ndarray, channels: list[JumpChannel]) -> np.ndarray:
    """Lindblad generator as a matrix on row-major vectorized densities."""
    dim = hamiltonian.shape[0]
    ident = np.eye(dim, dtype=complex)
    lv = -1j * (np.kron(hamiltonian, ident) - np.kron(ident, hamiltonian.T))
    for ch in channels:
        op = ch.op
        opdop = op.conj().T @ op
        lv += np.kron(op, op.conj())
        lv -= 0.5 * (np.kron(opdop, ident) + np.kron(ident, opdop.T))
    return lv


def _as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    if state.ndim == 2 and state.shape[0] == state.shape[1]:
        _check_hermitian(state, "rho0")
        if abs(np.trace(state).real - 1.0) > 1e-8:
            raise ValueError(f"rho0 must have unit trace, got {np.trace(state)}")
        return state
    raise ValueError(f"state must be a ket or a square density matrix, got shape {state.shape}")


def evolve_master(
    h: HilbertConfig,
    hamiltonian: np.ndarray,
    channels: list[JumpChannel],
    rho0: np.ndarray,
    grid: TimeGrid,
    leak_tol: float = 1e-6,
) -> np.ndarray:
    """Lindblad evolution on a uniform grid.

    ``rho0`` may be a ket (converted to a projector) or a density
    matrix.  Returns densities at every grid time, shape
    ``(n_steps + 1, dim, dim)``.  The one-step propagator
    ``expm(L dt)`` is computed once and iterated, so the result is
    exact at the grid times for any ``dt``.
    """
    _check_hermitian(hamiltonian, "hamiltonian")
    rho = _as_density(rho0)
    dim = hamiltonian.shape[0]
    lv = liouvillian(hamiltonian, channels)
    step = scipy.linalg.expm(lv * grid.dt)
    out = np.empty((grid.n_steps + 1, dim, dim), dtype=complex)
    out[0] = rho
    vec = rho.reshape(-1)
    for k in range(1, grid.n_steps + 1):
        vec = step @ vec
        out[k] = vec.reshape(dim, dim)
    traces = np.einsum("kii->k", out).real
    if np.abs(traces - 1.0).max() > 1e-8:
        raise IntegrationFailure(
            f"trace drifted by {np.abs(traces - 1.0).max():.2e} during master evolution"
        )
    top = _top_level_indices(h)
    pops = np.einsum("kii->ki", out).real
    leak = pops[:, top].sum(axis=1).max()
    if leak > leak_tol:
        raise TruncationLeak(
            f"top phonon level reached population {leak:.2e} > {leak_tol:.1e}; "
            f"raise n_max above {h.n_max}"
        )
    return out


def steady_state(
    h: HilbertConfig,
    hamiltonian: np.ndarray,
    channels: list[JumpChannel],
    leak_tol: float = 1e-6,
) -> np.ndarray:
    """Unique stationary density matrix of the Lindblad generator.

    Solves ``L vec(rho) = 0`` with the trace condition replacing one
    row, then verifies the residual against ``1e-10 * ||L||_F``.  A
    closed system is rejected up front (every Hamiltonian eigenstate
    would be stationary); a singular solve or a failed residual check
    also raises :class:`~bundlesim.errors.NoUniqueSteadyState`.
    """
    _check_hermitian(hamiltonian, "hamiltonian")
    if not channels:
        raise NoUniqueSteadyState("no dissipation channels: steady state is not unique")
    dim = hamiltonian.shape[0]
    lv = liouvillian(hamiltonian, channels)
    a = lv.copy()
    a[0, :] = 0.0
    a[0, :: dim + 1] = 1.0  # trace row on the diagonal entries of vec(rho)
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = scipy.linalg.solve(a, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise NoUniqueSteadyState(f"steady-state solve is singular: {exc}") from exc
    if not np.all(np.isfinite(vec)):
        raise SolverFailure("steady-state solve returned non-finite entries")
    residual = np.linalg.norm(lv @ vec)
    scale = np.linalg.norm(lv)
    if residual > 1e-10 * scale:
        raise NoUniqueSteadyState(
            f"steady-state residual {residual:.2e} exceeds 1e-10 * ||L|| = {1e-10 * scale:.2e}"
        )
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    top = _top_level_indices(h)
    leak = np.diag(rho).real[top].sum()
    if leak > leak_tol:
        raise TruncationLeak(
            f"steady state holds population {leak:.2e} > {leak_tol:.1e} in the top "
            f"phonon level; raise n_max above {h.n_max}"
        )
    return rho


def oscillation_period(times: np.ndarray, values: np.ndarray) -> float:
    """Full-transfer period of a sin^2-like population oscillation.

    Measures the time between the rising and the following falling
    crossing of the half-amplitude level and doubles it: for
    ``sin^2(w t)`` those crossings sit at phase pi/4 and 3 pi/4, a half
    period apart.  Fast small-amplitude ripples riding on the envelope
    (Mollow-regime traces) can cross the midline several times, so each
    crossing is located as the average of all midline crossings between
    an excursion below the 25% level and one above the 75% level; the
    ripple contributions then cancel on average.

    Raises ``ValueError`` when the trace never completes a half
    excursion (flat traces, or runs shorter than half a period).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.size < 3:
        raise ValueError("need matching time/value arrays with at least 3 samples")
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        raise ValueError("trace is constant; no period to fit")
    mid = lo + 0.5 * (hi - lo)
    low = lo + 0.25 * (hi - lo)
    high = lo + 0.75 * (hi - lo)

    def _crossings(a: int, b: int) -> float:
        """Mean time of all midline crossings in the sample range [a, b)."""
        ts = []
        for k in range(a, b):
            v0, v1 = values[k] - mid, values[k + 1] - mid
            if v0 == 0.0:
                ts.append(times[k])
            elif (v0 < 0.0) != (v1 < 0.0):
                ts.append(times[k] - v0 * (times[k + 1] - times[k]) / (v1 - v0))
        if not ts:
            raise ValueError("trace jumps across the half-amplitude level")
        return float(np.mean(ts))

    above_high = np.flatnonzero(values >= high)
    if above_high.size == 0:
        raise ValueError("trace never reaches the 75% level; no excursion to fit")
    i_high = int(above_high[0])
    below_low = np.flatnonzero(values[:i_high] <= low)
    j0 = int(below_low[-1]) if below_low.size else 0
    t_up = _crossings(j0, i_high)
    back_low = np.flatnonzero(values[i_high:] <= low)
    if back_low.size == 0:
        raise ValueError(
            "trace never returns to the 25% level; run is shorter than half a period"
        )
    i_low = i_high + int(back_low[0])
    still_high = np.flatnonzero(values[i_high:i_low] >= high)
    j1 = i_high + (int(still_high[-1]) if still_high.size else 0)
    t_down = _crossings(j1, i_low)
    return 2.0 * (t_down - t_up)


def frame_labels(h: HilbertConfig, frame: str) -> list[str]:
    """Basis labels in the projection frame, in column order."""
    if frame == "bare":
        return basis_labels(h)
    if frame == "displaced":
        labels = [f"{n},v" for n in range(h.dim_phonon)]
        labels += [f"{n}~,c" for n in range(h.dim_phonon)]
        return labels
    if frame == "dressed":
        labels = [f"{n},+" for n in range(h.dim_phonon)]
        labels += [f"{n},-" for n in range(h.dim_phonon)]
        return labels
    raise ValueError(f"unknown frame {frame!r}, expected one of {FRAMES}")


def _frame_basis(h: HilbertConfig, frame: str, p: SystemParams | None) -> np.ndarray:
    """Unitary whose columns are the frame's basis kets in the bare basis."""
    if frame == "bare":
        return np.eye(h.dim_total, dtype=complex)
    if frame == "displaced":
        if p is None:
            raise ValueError("displaced-frame projection needs the system parameters")
        # Physical displaced excited states: Fock states of the excited
        # block displaced by -lam/omega_b (see spectra._refine_targets).
        return polaron_transform(h, -p.lam / p.omega_b)
    if frame == "dressed":
        if p is None:
            raise ValueError("dressed-frame projection needs the system parameters")
        if p.omega_drive == 0:
            raise DegenerateDrive("dressed-frame projection needs a nonzero drive")
        ds = dressed_states(p.delta, p.omega_drive)
        cols = [dressed_product_state(h, n, "+", ds) for n in range(h.dim_phonon)]
        cols += [dressed_product_state(h, n, "-", ds) for n in range(h.dim_phonon)]
        return np.column_stack(cols)
    raise ValueError(f"unknown frame {frame!r}, expected one of {FRAMES}")


def project_populations(
    h: HilbertConfig,
    times: np.ndarray,
    states: np.ndarray,
    frame: str = "bare",
    p: SystemParams | None = None,
) -> PopulationTrace:
    """Populations of the bare, displaced, or dressed product basis.

    ``states`` is either the ket array from :func:`evolve_schrodinger`
    (shape ``(nt, dim)``) or the density array from
    :func:`evolve_master` (shape ``(nt, dim, dim)``).
    """
    basis = _frame_basis(h, frame, p)
    states = np.asarray(states)
    if states.ndim == 2:
        amps = states @ basis.conj()
        values = np.abs(amps) ** 2
    elif states.ndim == 3:
        transformed = np.einsum("ij,kjl,lm->kim", basis.conj().T, states, basis)
        values = np.einsum("kii->ki", transformed).real
    else:
        raise ValueError(f"states must be kets or densities, got shape {states.shape}")
    return PopulationTrace(
        times=np.asarray(times, dtype=float),
        labels=frame_labels(h, frame),
        values=values,
    )
