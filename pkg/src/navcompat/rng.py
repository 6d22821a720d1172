import numpy as np


def as_rng(seed=None) -> np.random.Generator:
    """Accept a seed or an existing generator; generators are passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def choice(rng: np.random.Generator, items):
    """Uniform pick from a sequence without numpy's array coercion."""
    return items[int(rng.integers(len(items)))]
