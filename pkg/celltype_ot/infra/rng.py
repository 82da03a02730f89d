"""
Seeded random streams.

Every draw in the package comes from a PCG64 generator keyed by
(seed, run, time point), so Monte Carlo runs and time points can be
generated in any order or on any thread and still reproduce bit for bit.
Within a stream, cell labels are drawn first, then expressions in cell order.
"""

import numpy as np

GENERATOR = "PCG64"
STREAM_VERSION = 1


def stream(seed: int, run: int = 0, time_index: int = 0) -> np.random.Generator:
    """Independent generator for one (run, time point) pair."""
    sequence = np.random.SeedSequence(seed, spawn_key=(STREAM_VERSION, run, time_index))
    return np.random.Generator(np.random.PCG64(sequence))
