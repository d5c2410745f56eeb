"""Exception and warning types shared across the package.

Everything raised on purpose by this package derives from
:class:`BundleSimError`, so callers can catch one type at the boundary.
Numerical health problems (truncation leaks, solver breakdowns) are kept
distinct from physics edge cases (degenerate drive, no resonance) and from
statistics problems (not enough clicks to estimate anything).
"""


class BundleSimError(Exception):
    """Base class for all errors raised deliberately by bundlesim."""


class TruncationLeak(BundleSimError):
    """Population reached the top Fock level beyond the allowed tolerance.

    Raised by the propagators and steady-state solver when the highest
    phonon level accumulates more population than ``leak_tol``; results at
    that truncation are untrustworthy and ``n_max`` should be raised.
    """


class IntegrationFailure(BundleSimError):
    """A time propagation failed a health check (norm, trace, or residual)."""


class SolverFailure(BundleSimError):
    """A linear-algebra step failed (singular system, bad factorization)."""


class NoUniqueSteadyState(BundleSimError):
    """The Liouvillian null space is not one dimensional."""


class DegenerateDrive(BundleSimError):
    """Dressed-state quantities requested at zero drive amplitude."""


class NoResonance(BundleSimError):
    """No real resonant detuning exists for the requested order and regime."""


class UndefinedCorrelation(BundleSimError):
    """Correlation requested where the phonon occupation is below the floor."""


class MissingSnapshot(BundleSimError):
    """A trajectory state was requested at a time that was never recorded."""


class InsufficientStatistics(BundleSimError):
    """Too few events to report the requested estimate at the target error.

    When a partial estimate exists it rides along as ``estimate`` so
    callers can surface partial results next to the warning.
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConfigError(BundleSimError):
    """Run configuration is malformed, incomplete, or carries unknown keys."""


class TruncationWarning(UserWarning):
    """Emitted when parameters stretch a truncation or a perturbative formula."""
