"""Reproducible random-stream derivation.

Every source of randomness in the simulator (population draws, channel
realizations, noise, precoder initialization, pilot subsampling) pulls from
its own substream, keyed by (master seed, role tag, agent index).  The key is
hashed into a 128-bit Philox key, so streams are independent, collision-free
for distinct tags, and identical across platforms.
"""

import hashlib

import numpy as np


def substream(master_seed: int, role: str, index: int = 0) -> np.random.Generator:
    """Return the counter-based generator for one (seed, role, index) slot."""
    tag = f"{int(master_seed)}:{role}:{int(index)}".encode()
    key = int.from_bytes(hashlib.blake2b(tag, digest_size=16).digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))
