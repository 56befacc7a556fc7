"""
Exceptions raised by pretraining_data_selection. Validation problems are ValueErrors so that callers can treat
them like any other bad-argument error, numerical failures are ArithmeticErrors.
"""


class FeatureFileError(ValueError):
    """A feature or label file could not be parsed or failed validation."""


class CentroidFileError(ValueError):
    """A centroid file is truncated, has the wrong magic bytes or an unsupported version."""


class ConfigError(ValueError):
    """A simulation sweep config contains an unknown, duplicate or invalid key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__("{}: {}".format(key, message))


class NumericalError(ArithmeticError):
    """Base class for failures of the numerical routines."""


class SinkhornOverflowError(NumericalError):
    """The scaling iteration produced non-finite potentials despite log-domain stabilisation."""


class DivergenceError(NumericalError):
    """An SGD run left the region ||theta|| <= divergence threshold."""

    def __init__(self, step, norm):
        self.step = step
        self.norm = norm
        super().__init__(
            "SGD diverged at step {}: ||theta|| = {:.3e}".format(step, norm)
        )
