import numpy as np


def path_rng(seed, index=0):
    """Generator for path ``index`` under base ``seed``.

    Streams are spawned from a single SeedSequence, so (seed, index) fixes a
    path regardless of how paths are split across workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
