"""Errors raised by the ensemble simulator and its oracles.

Every error derives from RealEnsembleError so management commands can turn any
of them into a CommandError, and from the builtin that describes it best so
library callers can catch them the usual way. Beable labels in messages are
1-based, as in every external format.
"""


class RealEnsembleError(Exception):
    pass


class SpecValidationError(RealEnsembleError, ValueError):
    """A ModelSpec (or lattice) violates one of its structural invariants."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


class NonHermitianError(RealEnsembleError, ValueError):
    pass


class ModeError(RealEnsembleError, ValueError):
    """An aligned-only operation was called on a per-member ensemble (or vice versa)."""


class StepSizeError(RealEnsembleError, ValueError):
    pass


class RateError(RealEnsembleError, ArithmeticError):
    """A copy rate or drift evaluated to a non-finite value."""


class NodeProximityError(RealEnsembleError, ArithmeticError):
    """The Madelung equations were asked to cross a node (rho_a below the floor)."""

    def __init__(self, class_index, time, rho):
        super().__init__(
            f"occupation of class {class_index + 1} fell to {rho:.3e} at t={time:.6g}; "
            f"the Madelung equations are singular at a node"
        )
        self.class_index = class_index
        self.time = time
        self.rho = rho


class PacketBoundaryError(RealEnsembleError, RuntimeError):
    pass


class NormalizationError(RealEnsembleError, ValueError):
    pass


class ConfigurationError(RealEnsembleError, ValueError):
    pass
