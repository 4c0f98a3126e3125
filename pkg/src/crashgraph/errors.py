"""Exception taxonomy shared by the library and the CLI.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and its
subclasses -> 3, NumericError -> 4.
"""


class CrashGraphError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CrashGraphError):
    """Invalid configuration value (bad ratios, unknown key, bad resolution)."""


class DataError(CrashGraphError):
    """Input data violates a contract (bad file, bad value, missing id)."""


class SchemaError(DataError):
    """A file is structurally wrong (missing column, bad header)."""


class BalanceError(DataError):
    """Class balancing is impossible (single-class input)."""


class EmbeddingError(DataError):
    """Embedding file or lookup violates the 384-dim contract."""


class GraphFormatError(DataError):
    """Graph/checkpoint file fails version, checksum, or invariant checks."""


class MetricError(DataError):
    """A metric is undefined for the given labels (e.g. single-class AUC)."""


class DomainError(DataError):
    """Scalar argument outside its documented domain."""


class ShapeError(CrashGraphError):
    """Matrix/kernel operands have incompatible shapes."""


class NumericError(CrashGraphError):
    """Numeric failure during training (non-finite loss or gradient)."""
