"""Exception hierarchy shared across the package."""


class AlloyOptError(Exception):
    """Base class for all errors raised by this package."""


class RegistryLoadError(AlloyOptError):
    """Base class for element/enthalpy file problems."""


class MissingColumnError(RegistryLoadError):
    pass


class NonPositiveValueError(RegistryLoadError):
    pass


class DuplicateSymbolError(RegistryLoadError):
    pass


class EnthalpyShapeError(RegistryLoadError):
    pass


class EnthalpyAsymmetryError(RegistryLoadError):
    pass


class EnthalpyDiagonalError(RegistryLoadError):
    pass


class DimensionMismatchError(AlloyOptError):
    """Composition length does not match the registry."""


class DegenerateRegistryError(AlloyOptError):
    """A mean feature (radius or electronegativity) came out zero."""


class CompositionError(AlloyOptError):
    """Vector is not a valid composition (negative entry or wrong sum)."""


class DatasetError(AlloyOptError):
    """Base class for dataset ingestion/processing problems."""


class UnknownColumnError(DatasetError):
    pass


class RowValidationError(DatasetError):
    """A CSV row failed validation; carries the 1-based row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyIndexError(DatasetError):
    pass


class TrainingDivergedError(AlloyOptError):
    """Loss became non-finite during training; carries the epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class UnsupportedSurrogateError(AlloyOptError):
    """Gradient requested from a surrogate that has no input gradient."""


class ConfigurationError(AlloyOptError):
    """Invalid objective/optimizer/experiment configuration."""


class InfeasibleStartError(AlloyOptError):
    """Equality constraint violated at the starting point."""


class NonFiniteEvaluationError(AlloyOptError):
    """Objective, constraint or gradient returned a non-finite value."""


class ExperimentError(AlloyOptError):
    """All restarts of an experiment failed; carries per-run diagnostics."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
