"""Exception types shared across the library.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
data errors 3, numeric/validation failures 4.
"""


class SubclusterError(Exception):
    """Base class for all library errors."""


class ConfigError(SubclusterError, ValueError):
    """A configuration violates its documented invariants."""


class GraphFormatError(SubclusterError, ValueError):
    """A graph or label file is malformed; message names the offending line."""


class ArtifactFormatError(SubclusterError, ValueError):
    """A serialized oracle is corrupt, truncated, or version-mismatched."""


class WrongGraphError(SubclusterError, ValueError):
    """An oracle artifact was queried against a graph it was not built on."""


class CapacityError(SubclusterError, RuntimeError):
    """A derandomized walk table was asked for more steps or walks than it holds."""


class NumericError(SubclusterError, ArithmeticError):
    """A numeric routine failed to converge or left its supported regime."""


class PolynomialBoundError(SubclusterError, ValueError):
    """Walk-weight polynomial failed grid validation; message names the bound and worst point."""


class PreprocessingFailure(SubclusterError, RuntimeError):
    """Preprocessing produced an empty representative set; retry with a new seed."""
