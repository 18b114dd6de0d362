import hashlib
from typing import Union

import numpy as np


# stream identifiers keep independent consumers of the master seed apart
GROUP_STREAM = 1
SCENARIO_STREAM = 2
SPLIT_STREAM = 3
CELL_STREAM = 4
BENIGN_STREAM = 5

SeedKey = Union[int, str]


def stable_key(text: str) -> int:
    """Maps a string to a non-negative 32 bit integer that is stable across processes"""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed_sequence(master_seed: int, *keys: SeedKey) -> np.random.SeedSequence:
    """
    Derives a SeedSequence from the master seed and a path of keys.

    The same (master_seed, keys) always yields the same sequence, independent
    of the order in which consumers are scheduled.

    Parameters
    ----------
    master_seed: non-negative experiment seed
    keys: integers or strings identifying the consumer

    Returns
    -------
    numpy SeedSequence
    """
    if master_seed < 0:
        raise ValueError(f"master_seed must be non-negative, got {master_seed}")
    entropy = [int(master_seed)]
    for key in keys:
        if isinstance(key, str):
            entropy.append(stable_key(key))
        elif int(key) < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
        else:
            entropy.append(int(key))
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *keys: SeedKey) -> np.random.Generator:
    """Returns a Generator seeded by derive_seed_sequence(master_seed, *keys)"""
    return np.random.default_rng(derive_seed_sequence(master_seed, *keys))
