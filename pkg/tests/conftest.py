import numpy as np

from dap.core import Instance


def random_instance(rng: np.random.Generator, d: float, max_horizon: int = 12,
                    high: float | None = None, zero_frac: float = 0.3) -> Instance:
    """Uniform demands in [0, high] with some steps zeroed; horizon uniform in [1, max_horizon]."""
    horizon = int(rng.integers(1, max_horizon + 1))
    high = 3.0 * d if high is None else high
    demands = rng.uniform(0.0, high, size=horizon)
    demands = demands * (rng.random(horizon) >= zero_frac)
    return Instance(d, tuple(demands))


def sparse_instance(rng: np.random.Generator, d: float, horizon_range=(15, 80),
                    scale_range=(0.15, 1.2), zero_frac: float = 0.2) -> Instance:
    """Exponential per-step demands at experiment-like density relative to d."""
    horizon = int(rng.integers(*horizon_range))
    scale = rng.uniform(*scale_range)
    demands = rng.exponential(scale, size=horizon) * (rng.random(horizon) >= zero_frac)
    return Instance(d, tuple(demands))
