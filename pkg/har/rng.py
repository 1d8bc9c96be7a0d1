import numpy as np
import torch


class RandomStream:
    """
    Deterministic random stream identified by a master seed and an index path.
    substream(i) derives an independent child stream; the same (seed, path) always
    yields the same draw sequence.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        self.derived_seed = int(
            np.random.SeedSequence(self.seed, spawn_key=self.path).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)
        )
        self.generator = torch.Generator(device="cpu").manual_seed(self.derived_seed)

    def substream(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + (index,))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path})"


def as_generator(rng) -> torch.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, torch.Generator):
        return rng
    raise TypeError(f"expected a RandomStream or torch.Generator, got {type(rng).__name__}")
