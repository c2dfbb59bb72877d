"""Exception taxonomy shared across the package."""


class HystgradError(Exception):
    """Base class for all package-specific failures."""


class GeometryError(HystgradError):
    """A geometry (band placement, proportions) does not fit the potential."""


class ConstructionError(HystgradError):
    """A built object failed its own integrity audit."""


class NumericalAccuracyError(HystgradError):
    """Quadrature self-check disagreement beyond tolerance."""


class TrackingError(HystgradError):
    """Equilibrium tracking lost its minimum for a non-bifurcation reason."""


class NonConvergenceError(HystgradError):
    """An iterative solve exceeded its budget."""


class RealizationMismatchError(HystgradError):
    """A simulated state failed to match the realization bookkeeping."""
