"""Exception hierarchy shared by all modules."""


class LayerQMError(Exception):
    """Base class for errors raised by layerqm."""


class DomainError(LayerQMError, ValueError):
    """Argument outside the domain of a function."""


class ThresholdError(DomainError):
    """Spectral parameter sits on a threshold / essential-spectrum point."""


class SingularInputError(DomainError):
    """Evaluation at a coincident-point singularity of a Green's function."""


class ConfigurationError(LayerQMError, ValueError):
    """Invalid arrangement of perturbations (e.g. duplicate positions)."""


class EmbeddedEigenvalueError(LayerQMError, ArithmeticError):
    """The Krein matrix is singular at an energy above the first threshold."""
