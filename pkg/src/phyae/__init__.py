"""phyae: learned physical-layer transceivers with classical benchmarks.

A small double-precision NN engine (1-D conv, locally connected, positionwise
dense, Adam) trains convolutional autoencoders end-to-end through multipath
and per-subcarrier fading channels, and a Monte-Carlo harness benchmarks them
against Gray-coded QAM with MMSE/ZF equalization, optionally concatenated
with a rate-1/2 LDPC code.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, FormatError, PhyaeError, SimulationError,
                     TrainingDiverged)

__all__ = [
    "ConfigError",
    "FormatError",
    "PhyaeError",
    "SimulationError",
    "TrainingDiverged",
    "__version__",
]
