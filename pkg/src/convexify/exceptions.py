"""Exception hierarchy shared by all modules."""


class ConvexifyError(ValueError):
    """Base class; carries a short machine-readable ``kind``."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class ConfigurationError(ConvexifyError):
    kind = "configuration"


class PositivityError(ConvexifyError):
    kind = "positivity"


class EllipticityError(ConvexifyError):
    kind = "ellipticity"


class SymmetryError(ConvexifyError):
    kind = "symmetry"


class WeightOverflowError(ConvexifyError):
    kind = "weight_overflow"


class InfeasibleDataError(ConvexifyError):
    kind = "infeasible_data"


class UnsupportedGeneratorError(ConvexifyError):
    kind = "unsupported_generator"


class GridMismatchError(ConvexifyError):
    kind = "grid_mismatch"
