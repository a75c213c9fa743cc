"""Independent random streams derived from ``(seed, replica, tag)``."""
import numpy as np

TAGS = {"init": 0, "dynamics": 1, "init-b": 2, "bootstrap": 3, "aux": 4, "target": 5,
        "inv": 6, "inv-half": 7, "couple": 8, "ensembles": 9, "lln": 10, "fit": 11}


def stream(seed: int, *key) -> np.random.Generator:
    """Generator for the spawn key ``key`` under ``seed``.

    String components are mapped through ``TAGS`` so that streams stay
    stable when new tags are appended.
    """
    spawn = tuple(TAGS[k] if isinstance(k, str) else int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=spawn)))


def child_seed(rng: np.random.Generator) -> int:
    """A 31-bit seed for numba's internal generator, drawn from ``rng``."""
    return int(rng.integers(0, 2**31 - 1))
