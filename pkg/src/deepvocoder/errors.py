"""Exception types shared across the codec."""


class FormatError(ValueError):
    """A container, model, or codebook file failed structural validation."""


class ConfigError(ValueError):
    """Mutually inconsistent model, codebook, or rate-mode settings."""


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch, message=None):
        super().__init__(message or f"training diverged at epoch {epoch}")
        self.epoch = epoch


class InsufficientDataError(ValueError):
    """Not enough data to carry out the requested operation."""
