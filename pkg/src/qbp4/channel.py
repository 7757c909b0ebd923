"""Pauli error sampling.

Every trial draws from its own generator seeded by ``(master_seed,
trial_index)``, so a sample does not depend on which other trials were
drawn, in what order, or on which worker.
"""
from dataclasses import dataclass

import numpy as np

_CODES = np.array([3, 1, 2], dtype=np.uint8)  # Y, X, Z


@dataclass(frozen=True)
class DepolarizingConfig:
    epsilon: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


def trial_rng(master_seed, trial_index, stream=0):
    return np.random.default_rng([int(master_seed), int(stream), int(trial_index)])


def _depolarize(n, epsilon, rng):
    u = rng.random(n)
    hit = u < epsilon
    e = np.zeros(n, dtype=np.uint8)
    # one uniform per qubit: below epsilon its position picks Y, X or Z
    e[hit] = _CODES[np.minimum((u[hit] * 3 / epsilon).astype(np.int64), 2)]
    return e


def sample_depolarizing(n, cfg, trial_index):
    """Each qubit independently: I w.p. 1 - eps, else X, Y, Z w.p. eps/3 each."""
    if n < 1:
        raise ValueError("n must be positive")
    return _depolarize(n, cfg.epsilon, trial_rng(cfg.rng_seed, trial_index))


def sample_fixed_weight(n, w, rng):
    """Uniform support of size ``w``, each nonzero entry uniform over {1, omega, omega-bar}."""
    if not 0 <= w <= n:
        raise ValueError(f"error weight {w} outside [0, {n}]")
    e = np.zeros(n, dtype=np.uint8)
    support = rng.choice(n, size=w, replace=False)
    e[support] = _CODES[rng.integers(0, 3, size=w)]
    return e


def depolarizing_batch(n, cfg, trial_indices):
    return np.array([sample_depolarizing(n, cfg, t) for t in trial_indices], dtype=np.uint8).reshape(-1, n)


def fixed_weight_batch(n, w, master_seed, trial_indices):
    return np.array(
        [sample_fixed_weight(n, w, trial_rng(master_seed, t, stream=1)) for t in trial_indices],
        dtype=np.uint8,
    ).reshape(-1, n)
