"""System definition: parameters, Hamiltonians, and collapse channels.

Everything works in the frame rotating at the drive frequency, with all
energies in units of the phonon frequency ``omega_b`` (so ``omega_b = 1``
in practice) and hbar = 1.  The laser detuning is
``delta = omega_sigma - omega_laser``.

The bare rotating-frame Hamiltonian is

    H = omega_b b†b + delta sigma†sigma
        + lam sigma†sigma (b† + b) + omega_drive (sigma + sigma†)

and dissipation enters through the standard Lindblad dissipators with
collapse operators sqrt(kappa) b (phonon loss), sqrt(gamma) sigma
(emitter decay) and sqrt(gamma_phi) sigma†sigma (pure dephasing).

Converting to laboratory units: if ``omega_b_physical`` holds the phonon
frequency omega_b / 2 pi in Hz, a dimensionless rate r maps to
``r * 2 pi * omega_b_physical`` events per second and a dimensionless
time t to ``t / (2 pi * omega_b_physical)`` seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (
    HilbertConfig,
    _phonon_destroy,
    destroy,
    number,
    qd_lowering,
    qd_occupation,
    qd_raising,
)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the driven emitter-phonon system.

    All frequencies and rates are in units of ``omega_b`` unless stated
    otherwise.  ``omega_b_physical`` is optional and only used to quote
    results in laboratory units; it holds omega_b / 2 pi in Hz.
    """

    omega_b: float = 1.0
    delta: float = 0.0
    lam: float = 0.0
    omega_drive: float = 0.0
    kappa: float = 0.0
    gamma: float = 0.0
    gamma_phi: float = 0.0
    omega_b_physical: float | None = None

    def __post_init__(self) -> None:
        if self.omega_b <= 0:
            raise ValueError(f"omega_b must be positive, got {self.omega_b}")
        for name in ("kappa", "gamma", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.omega_b_physical is not None and self.omega_b_physical <= 0:
            raise ValueError(
                f"omega_b_physical must be positive, got {self.omega_b_physical}"
            )


@dataclass(frozen=True)
class JumpChannel:
    """One Lindblad collapse channel.

    ``op`` is the pre-scaled collapse operator (already multiplied by
    sqrt(rate)), so dissipators can be built from ``op`` alone; the bare
    rate and a label are kept for bookkeeping and click records.
    """

    label: str
    rate: float
    op: np.ndarray = field(repr=False)


def rotating_hamiltonian(p: SystemParams, h: HilbertConfig) -> np.ndarray:
    """Rotating-frame Hamiltonian in the bare (lab) basis."""
    b = destroy(h)
    sm = qd_lowering(h)
    sp = qd_raising(h)
    proj_c = qd_occupation(h)
    return (
        p.omega_b * number(h)
        + p.delta * proj_c
        + p.lam * proj_c @ (b.conj().T + b)
        + p.omega_drive * (sm + sp)
    )


def displaced_hamiltonian(p: SystemParams, h: HilbertConfig) -> np.ndarray:
    """Rotating-frame Hamiltonian after the polaron transform.

    The conditional displacement exp((lam/omega_b) sigma†sigma (b† - b))
    removes the linear emitter-phonon coupling, shifts the emitter
    energy by -lam**2/omega_b, and dresses the drive with displacement
    factors:

        H = omega_b b†b + (delta - lam**2/omega_b) sigma†sigma
            + omega_drive (sigma† D(eta) + D(-eta) sigma),  eta = lam/omega_b.

    Same spectrum as :func:`rotating_hamiltonian` up to truncation
    effects at the top Fock levels.
    """
    from scipy.linalg import expm

    eta = p.lam / p.omega_b
    a = _phonon_destroy(h)
    d = expm(eta * (a.conj().T - a))
    raising_block = np.zeros((2, 2), dtype=complex)
    raising_block[1, 0] = 1.0
    drive = p.omega_drive * np.kron(raising_block, d)
    return (
        p.omega_b * number(h)
        + (p.delta - p.lam**2 / p.omega_b) * qd_occupation(h)
        + drive
        + drive.conj().T
    )


def jump_channels(p: SystemParams, h: HilbertConfig) -> list[JumpChannel]:
    """Collapse channels for the three dissipation processes.

    Channels with zero rate are omitted, so the returned list can be fed
    straight to the master-equation and trajectory machinery without
    wasting work on silent channels.
    """
    spec = (
        ("phonon", p.kappa, destroy(h)),
        ("photon", p.gamma, qd_lowering(h)),
        ("dephase", p.gamma_phi, qd_occupation(h)),
    )
    return [
        JumpChannel(label=label, rate=rate, op=np.sqrt(rate) * base)
        for label, rate, base in spec
        if rate > 0
    ]


def physical_rate(p: SystemParams, rate_internal: float) -> float | None:
    """Convert a rate in units of omega_b to events per second.

    Returns ``None`` when ``omega_b_physical`` is not set.
    """
    if p.omega_b_physical is None:
        return None
    return rate_internal * 2.0 * np.pi * p.omega_b_physical
