"""Exception types shared across the package."""


class ProflearnError(Exception):
    """Base class for all library errors."""


class ShapeError(ProflearnError):
    """An array has an invalid or unexpected shape."""


class CompositionError(ShapeError):
    """Adjacent layers in a network spec do not compose."""


class DataError(ProflearnError):
    """A dataset, file, or record failed validation."""


class FormatError(ProflearnError):
    """A serialized artifact is corrupt or has the wrong version."""


class TrainingDivergedError(ProflearnError):
    """Loss or gradients became non-finite during training."""
