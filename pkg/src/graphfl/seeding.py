"""Named random streams derived from one master seed.

Each consumer (graph layout, data, initial weights, device hardware, per-device
round sampling) gets its own stream so toggling one feature never shifts the
draws of another.
"""

import numpy as np

GRAPH = 1
POOL = 2
PARTITION = 3
INIT = 4
SPECS = 5
CLIENT = 6


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))

STREAMS = {"graph": GRAPH, "pool": POOL, "partition": PARTITION, "init": INIT,
           "specs": SPECS, "client": CLIENT}
