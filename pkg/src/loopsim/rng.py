"""Named, independently seeded random streams.

Every source of randomness in a simulation run is drawn from one of a
fixed set of named streams.  Each stream is a counter-based Philox4x64
generator keyed by ``(master_seed, stream_id)``, so streams never overlap
and toggling one feedback loop cannot shift the draws consumed by an
unrelated part of the pipeline.  Philox output is platform independent,
which is what makes byte-identical trace exports possible across machines.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream ids are part of the reproducibility contract: changing them (or
# the order of draws within a step) invalidates committed golden traces.
STREAM_IDS = {
    "population_init": 0,
    "user_selection": 1,
    "outcome": 2,
    "feature_noise": 3,
    "replacement": 4,
    "training": 5,
    "split": 6,
}


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Return the named Philox stream for a master seed."""
    try:
        sid = STREAM_IDS[name]
    except KeyError:
        raise ValueError(f"unknown random stream {name!r}") from None
    key = np.array([int(master_seed) & _MASK64, sid], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class RandomStreams:
    """All named streams of one simulation run."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        for name in STREAM_IDS:
            setattr(self, name, stream(master_seed, name))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomStreams(master_seed={self.master_seed})"
