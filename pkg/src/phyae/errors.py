"""Exception types shared across the package.

The CLI maps these onto machine-parseable error categories; library code
raises them (or plain ValueError for argument misuse).
"""


class PhyaeError(Exception):
    """Base class for package errors."""

    category = "runtime-error"


class ConfigError(PhyaeError):
    """Invalid or inconsistent configuration."""

    category = "config-error"


class FormatError(PhyaeError):
    """Malformed file content (checkpoint, alist, CSV, metadata)."""

    category = "format-error"


class SimulationError(PhyaeError):
    """An experiment could not run or reproduce as requested."""

    category = "simulation-error"


class TrainingDiverged(PhyaeError):
    """Loss became non-finite during training."""

    category = "training-diverged"

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
