import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    """Child seed for the stream identified by `keys` under `master`."""
    sequence = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
