"""Keyed random substreams.

Every consumer gets its own Philox (counter-based) generator derived from
the run seed and an integer key path, e.g. ``(chain, iteration)``, so that
results do not depend on evaluation order or on how work is split across
processes.
"""

import numpy as np


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
