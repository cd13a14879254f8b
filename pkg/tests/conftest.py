import math

import numpy as np


def uniform_grid(frames: int, classes: int) -> np.ndarray:
    return np.full((frames, classes), math.log(1.0 / classes))


def random_grid(rng: np.random.Generator, frames: int, classes: int) -> np.ndarray:
    """Row-normalized log-probabilities."""
    logits = rng.standard_normal((frames, classes))
    return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
