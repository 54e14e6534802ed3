"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ParabSynthError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(ParabSynthError):
    """Invalid user input (parameters, germ data, run configuration)."""


class NumericalError(ParabSynthError):
    """A numerical procedure could not deliver a trustworthy answer."""


class PoleAt(NumericalError):
    """Evaluation was requested at (or numerically on) a pole."""

    def __init__(self, z: complex):
        super().__init__(f"pole at z={complex(z)!r}")
        self.z = complex(z)


class PoleOfXf(PoleAt):
    """A point where ``1 + X0 . f`` vanishes, i.e. a pole of the synthesized field."""


class BranchError(NumericalError):
    """A multivalued function was evaluated on one of its cuts."""


class OutsideRadius(NumericalError):
    """A germ was evaluated outside its declared disc of convergence."""


class OrderLoss(NumericalError):
    """Truncated series arithmetic lost all significant orders."""


class TailTooLarge(NumericalError):
    """Sampled Taylor coefficients do not decay to the noise floor."""


class DomainMismatch(ConfigError):
    """Two germs share no common domain where a comparison is possible."""


class NotAdapted(NumericalError):
    """First-integral values leave the convergence disc of the data."""


class QuadratureUnderResolved(NumericalError):
    """A ray quadrature did not reach its truncation tolerance."""


class NotContracting(NumericalError):
    """The fixed-point iteration stopped contracting."""


class MaxIter(NumericalError):
    """An iteration reached its budget without converging."""


class NewtonDiverged(NumericalError):
    """Newton iteration failed to converge."""


class DuplicateRoot(NumericalError):
    """Two seeds converged to the same root."""


class StableDirectionNotFound(NumericalError):
    """No incoming trajectory direction could be located at a pole."""


class LengthNotReached(NumericalError):
    """A shooting trajectory ended before reaching its target time."""


class FixedPointNotFound(NumericalError):
    """No fixed point of the time-1 map was found near the seed."""


class ClassificationFailed(NumericalError):
    """A singular point could not be classified."""


class SingularOnPath(NumericalError):
    """A path integral met a singularity of its integrand."""


class RadiusViolation(NumericalError):
    """A map was sampled outside its disc of holomorphy."""


class VerificationFailure(ParabSynthError):
    """A verification suite reported at least one failing check."""
