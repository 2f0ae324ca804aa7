"""Named random-number sub-streams derived from a single root seed.

Every source of randomness in the package (splits, parameter init, dropout,
instance sampling, batching) pulls its own generator via `substream`, so two
runs with the same root seed replay identically regardless of how many other
streams were consumed in between.
"""

import hashlib

import numpy as np


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for (root_seed, name).

    The stream key is derived from a stable hash of the name, not Python's
    salted hash(), so streams are reproducible across processes.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([root_seed & 0xFFFFFFFF] + words))
