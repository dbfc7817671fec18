"""Named random streams derived from one master seed.

Every stream is keyed by a tuple of small integers, so adding operators or
targets never shifts the randomness of existing ones.
"""
import numpy as np

CONDITION_CODES = {"manual": 0, "robotic": 1}
TIER_CODES = {"expert": 0, "novice": 1}


def seed_for(master_seed: int, *key: int) -> int:
    """A 32-bit trial seed for the stream ``key`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1)[0])


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))
