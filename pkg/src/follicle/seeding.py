"""Named, reproducible random streams derived from one master seed.

Every source of randomness in the pipeline draws from a stream obtained
here, so a run is fully determined by (master seed, stream label). Labels
in use: "split", "oversample", "augment", "init:<layer>", "shuffle",
"dropout", "synthetic".
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(label: str) -> int:
    """Stable 32-bit key for a stream label (process-independent)."""
    return zlib.crc32(label.encode("utf-8"))


def seed_stream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for the given (seed, label, index) triple."""
    return np.random.default_rng([master_seed & 0xFFFFFFFFFFFFFFFF, stream_key(label), index])


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Collapse a (seed, label, index) triple to a single storable integer.

    Used for per-sample augmentation seeds persisted in manifests, so an
    augmented copy can be regenerated without replaying the whole stream.
    """
    ss = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, stream_key(label), index])
    return int(ss.generate_state(1, np.uint64)[0])
