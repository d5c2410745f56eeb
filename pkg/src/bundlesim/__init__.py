"""Multiphonon bundle emission from a driven emitter-phonon system.

Subpackages by task:

- :mod:`bundlesim.operators` — truncated-space operator factories
- :mod:`bundlesim.model` — parameters, Hamiltonians, collapse channels
- :mod:`bundlesim.spectra` — dressed states and multiphonon Rabi analytics
- :mod:`bundlesim.dynamics` — closed/open propagation and steady states
- :mod:`bundlesim.correlations` — equal-time phonon correlations and scans
- :mod:`bundlesim.trajectories` — quantum-jump unravelling, bundles, purity
- :mod:`bundlesim.cli` — the ``bundle-sim`` command-line driver
"""

__version__ = "0.1.0"

from .errors import (
    BundleSimError,
    ConfigError,
    DegenerateDrive,
    InsufficientStatistics,
    IntegrationFailure,
    MissingSnapshot,
    NoResonance,
    NoUniqueSteadyState,
    SolverFailure,
    TruncationLeak,
    TruncationWarning,
    UndefinedCorrelation,
)
from .model import JumpChannel, SystemParams
from .operators import HilbertConfig, default_n_max

__all__ = [
    "__version__",
    "BundleSimError",
    "ConfigError",
    "DegenerateDrive",
    "HilbertConfig",
    "InsufficientStatistics",
    "IntegrationFailure",
    "JumpChannel",
    "MissingSnapshot",
    "NoResonance",
    "NoUniqueSteadyState",
    "SolverFailure",
    "SystemParams",
    "TruncationLeak",
    "TruncationWarning",
    "UndefinedCorrelation",
    "default_n_max",
]
