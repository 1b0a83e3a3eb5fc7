"""Seed splitting.

Every random stream of an experiment is keyed by the global seed plus a path of
names, e.g. ('defense', image_id, 'two_way', repeat). Strings enter the key as
their crc32, so streams depend only on the names and never on evaluation order
or the worker a task lands on.
"""
import zlib

import numpy as np


Key = str | int


def _entropy(seed: int, keys: tuple[Key, ...]) -> list[int]:
    words = [seed]
    for k in keys:
        if isinstance(k, str):
            words.append(zlib.crc32(k.encode()))
        else:
            assert k >= 0, k
            words.append(int(k))
    return words


def seed_sequence(seed: int, *keys: Key) -> np.random.SeedSequence:
    return np.random.SeedSequence(_entropy(seed, keys))


def rng_for(seed: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))


def int_seed(seed: int, *keys: Key) -> int:
    """A 32-bit integer seed, for configs that carry their own seed field."""
    return int(seed_sequence(seed, *keys).generate_state(1)[0])
