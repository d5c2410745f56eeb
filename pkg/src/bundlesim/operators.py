"""Operator factories on the truncated two-level-emitter + phonon space.

The joint Hilbert space is (QD) x (phonon Fock space truncated at
``n_max``), stored QD-major: index ``q * (n_max + 1) + n`` holds the
amplitude of ``|n, q>`` with ``q = 0`` the ground state ``|v>`` and
``q = 1`` the excited state ``|c>``.  All operators are dense complex
``numpy`` arrays; at the dimensions this package works at (a few tens)
dense beats sparse on every count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

QD_LABELS = ("v", "c")


@dataclass(frozen=True)
class HilbertConfig:
    """Truncation choice for the joint space.

    Parameters
    ----------
    n_max : int
        Highest phonon Fock level kept.  The phonon factor has
        ``n_max + 1`` levels; the joint space ``2 * (n_max + 1)``.
    """

    n_max: int

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim_phonon(self) -> int:
        return self.n_max + 1

    @property
    def dim_total(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, n: int, qd: str) -> int:
        """Flat index of the basis state ``|n, qd>``."""
        if qd not in QD_LABELS:
            raise ValueError(f"qd must be 'v' or 'c', got {qd!r}")
        if not 0 <= n <= self.n_max:
            raise ValueError(f"phonon level {n} outside 0..{self.n_max}")
        return QD_LABELS.index(qd) * self.dim_phonon + n


def default_n_max(n_target: int) -> int:
    """Truncation that comfortably holds an n-phonon emission cascade.

    Four phonon levels of headroom per target phonon plus four spare
    levels keeps the top-level population far below the leak tolerance
    for every parameter set exercised in this package.
    """
    return 4 * n_target + 4


def _phonon_destroy(h: HilbertConfig) -> np.ndarray:
    a = np.zeros((h.dim_phonon, h.dim_phonon), dtype=complex)
    for n in range(1, h.dim_phonon):
        a[n - 1, n] = np.sqrt(n)
    return a


def destroy(h: HilbertConfig) -> np.ndarray:
    """Phonon annihilation operator b on the joint space."""
    return np.kron(np.eye(2, dtype=complex), _phonon_destroy(h))


def create(h: HilbertConfig) -> np.ndarray:
    """Phonon creation operator b† on the joint space."""
    return destroy(h).conj().T


def number(h: HilbertConfig) -> np.ndarray:
    """Phonon number operator b†b on the joint space."""
    n_diag = np.arange(h.dim_phonon, dtype=float)
    return np.kron(np.eye(2, dtype=complex), np.diag(n_diag).astype(complex))


def qd_lowering(h: HilbertConfig) -> np.ndarray:
    """Emitter lowering operator sigma = |v><c| on the joint space."""
    s = np.zeros((2, 2), dtype=complex)
    s[0, 1] = 1.0
    return np.kron(s, np.eye(h.dim_phonon, dtype=complex))


def qd_raising(h: HilbertConfig) -> np.ndarray:
    """Emitter raising operator sigma† = |c><v| on the joint space."""
    return qd_lowering(h).conj().T


def qd_occupation(h: HilbertConfig) -> np.ndarray:
    """Projector sigma†sigma onto the excited emitter state."""
    return qd_raising(h) @ qd_lowering(h)


def displacement(h: HilbertConfig, alpha: float) -> np.ndarray:
    """Phonon displacement exp(alpha (b† - b)) acting on the joint space.

    The generator is anti-Hermitian even after truncation, so the
    returned matrix is unitary to machine precision for any ``alpha``;
    how faithfully it displaces depends on ``alpha`` against ``n_max``.
    """
    a = _phonon_destroy(h)
    d = expm(alpha * (a.conj().T - a))
    return np.kron(np.eye(2, dtype=complex), d)


def polaron_transform(h: HilbertConfig, alpha: float) -> np.ndarray:
    """Conditional displacement exp(alpha sigma†sigma (b† - b)).

    Identity on the emitter ground block, phonon displacement by
    ``alpha`` on the excited block.  With ``alpha = lambda / omega_b``
    this is the polaron transform that diagonalizes the emitter-phonon
    coupling at zero drive.
    """
    a = _phonon_destroy(h)
    d = expm(alpha * (a.conj().T - a))
    out = np.zeros((h.dim_total, h.dim_total), dtype=complex)
    out[: h.dim_phonon, : h.dim_phonon] = np.eye(h.dim_phonon)
    out[h.dim_phonon :, h.dim_phonon :] = d
    return out


def tensor_basis_state(h: HilbertConfig, n: int, qd: str) -> np.ndarray:
    """Unit vector for the product state ``|n, qd>``."""
    psi = np.zeros(h.dim_total, dtype=complex)
    psi[h.index(n, qd)] = 1.0
    return psi


def basis_labels(h: HilbertConfig) -> list[str]:
    """Labels ``'n,q'`` for every joint basis state, in index order."""
    return [f"{n},{q}" for q in QD_LABELS for n in range(h.dim_phonon)]
