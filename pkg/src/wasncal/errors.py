"""Exception types shared across the package."""


class SamplingFailure(RuntimeError):
    """Constraint-satisfying sample not found within the retry budget."""


class MeasurementUnavailable(RuntimeError):
    """A measurement (e.g. decay-based reverberation time) cannot be made."""


class ConfigurationError(ValueError):
    """Invalid or incomplete configuration (missing corpus, bad paths, ...)."""


class ShapeError(ValueError):
    """Array shape incompatible with a layer or operation."""


class StateError(RuntimeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class TrainingDivergence(RuntimeError):
    """Non-finite loss or gradient encountered during training."""


class ScaleUnavailable(RuntimeError):
    """No usable distance estimate remains to recover the geometry scale."""


class QuorumFailure(RuntimeError):
    """RANSAC found no hypothesis reaching the inlier quorum."""


class UndefinedMetric(ValueError):
    """Metric undefined for the given inputs (e.g. F1 with no positives)."""
