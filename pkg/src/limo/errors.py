"""Exception taxonomy.

Three families matter to the CLI exit-code contract: configuration problems
(exit 2), data problems (exit 3), and numeric failures (exit 4). Everything
inherits LimoError so library users can catch broadly.
"""


class LimoError(Exception):
    pass


class ConfigError(LimoError):
    """Bad or inconsistent run configuration."""


class DataError(LimoError):
    """Malformed, missing, or incompatible input data."""


class NumericError(LimoError):
    """NaN/inf or a violated numeric invariant at runtime."""


# -- config family ------------------------------------------------------------

class ConfigInvalid(ConfigError):
    pass


class InvalidRange(ConfigError):
    """Schedule or hyperparameter outside its legal range."""


class CheckpointIncompatible(ConfigError):
    """Checkpoint parameter shapes disagree with the configured model."""


# -- data family ---------------------------------------------------------------

class WidthMismatch(DataError):
    """Row width differs from the declared coefficient layout."""


class MalformedHeader(DataError):
    pass


class EmptySequence(DataError):
    pass


class TooShort(DataError):
    """Sequence too short for the requested operation."""


class ShapeMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class InsufficientSamples(DataError):
    pass


class UnknownEmotion(DataError):
    pass


class UnknownAu(DataError):
    pass


class EmptyText(DataError):
    pass


class DatasetMissing(DataError):
    pass


# -- numeric family ------------------------------------------------------------

class NonFiniteValue(NumericError):
    pass


class NonFiniteGradient(NumericError):
    pass


class StepOutOfRange(LimoError):
    """Diffusion step index outside [0, diffusion_steps)."""
