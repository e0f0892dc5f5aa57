"""Exception hierarchy shared by every signet module."""


class SignetError(Exception):
    """Base class for all signet errors."""


class ParseError(SignetError):
    """Malformed input file (unknown relation label, wrong column count)."""


class ReferentialError(SignetError):
    """An edge names a node id that does not exist."""


class SchemaError(SignetError):
    """Node kinds do not match what a relation requires."""


class ConfigError(SignetError):
    """Invalid configuration or precondition violation."""


class ShapeError(SignetError):
    """Operand shapes are incompatible for a kernel."""


class NumericHealthError(SignetError):
    """A kernel, gradient or loss produced NaN or Inf."""


class UndefinedMetricError(SignetError):
    """A metric is undefined for the given input (e.g. single-class labels)."""


class CheckpointError(SignetError):
    """Checkpoint is truncated, of the wrong version, or mismatches the config."""
