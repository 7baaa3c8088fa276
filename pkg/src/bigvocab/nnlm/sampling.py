"""Noise distributions for sampled output layers."""

import numpy as np


class AliasTable:
    """Walker's alias method: O(n) setup, O(1) per draw."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) == 0 or np.any(probs < 0) or probs.sum() <= 0:
            raise ValueError("alias table needs a non-empty, non-negative, non-zero distribution")
        n = len(probs)
        scaled = probs / probs.sum() * n
        self.prob = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            self.prob[i] = 1.0

    def __len__(self):
        return len(self.prob)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(len(self.prob), size=size)
        keep = rng.random(size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])


def noise_distribution(counts, beta: float = 0.5) -> np.ndarray:
    """q(w) proportional to count(w)^beta.

    Zero counts are floored at half a count so that every unit, including
    ones never seen in training, has a finite log q.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1], got %r" % beta)
    counts = np.maximum(np.asarray(counts, dtype=np.float64), 0.5)
    q = counts ** beta
    return q / q.sum()


class NoiseSampler:
    """Draws k noise ids, shared by a whole mini-batch, from q."""

    def __init__(self, counts, beta: float = 0.5, num_noise: int = 500):
        if num_noise < 1:
            raise ValueError("num_noise must be >= 1")
        self.q = noise_distribution(counts, beta)
        self.log_q = np.log(self.q)
        self.num_noise = num_noise
        self.beta = beta
        self._table = AliasTable(self.q)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return self._table.sample(self.num_noise if size is None else size, rng)


def sample_noise(counts, beta: float, num_noise: int, seed: int) -> np.ndarray:
    return NoiseSampler(counts, beta, num_noise).sample(np.random.default_rng(seed))
