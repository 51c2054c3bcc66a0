"""Backtracking Search Optimization Algorithm (BSA).

Minimizes a black-box function over a box. The mutation amplitude is
``eta * N(0, 1)``, drawn once per generation; ``eta = 3`` gives the
amplitude of the original formulation. Each generation draws every
random number it needs before any fitness evaluation, so evaluation order
(or parallel dispatch) never perturbs the random stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DegenerateProblemError(RuntimeError):
    """Every individual of the initial population had a non-finite fitness."""


@dataclass(frozen=True)
class BsaConfig:
    population_size: int = 100
    iterations: int = 800
    eta: float = 1.0
    bounds: tuple[tuple[float, float], ...] = ((-10.0, 10.0),)
    mixrate: float = 1.0
    seed: Optional[int] = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0.0 < self.mixrate <= 1.0:
            raise ValueError("mixrate must lie in (0, 1]")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds or any(not lo < hi for lo, hi in bounds):
            raise ValueError("each bound needs low < high")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def with_bounds(self, low: float, high: float, dim: int) -> "BsaConfig":
        return BsaConfig(self.population_size, self.iterations, self.eta,
                         ((low, high),) * dim, self.mixrate, self.seed)


@dataclass
class Individual:
    position: np.ndarray
    fitness: float


@dataclass
class BsaResult:
    best_position: np.ndarray
    best_fitness: float
    history: np.ndarray = field(repr=False)
    evaluations: int = 0

    @property
    def best(self) -> Individual:
        return Individual(self.best_position, self.best_fitness)


def _evaluate(fitness, pop: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        f = np.asarray(fitness(pop), dtype=float).reshape(pop.shape[0])
    else:
        f = np.array([fitness(x) for x in pop], dtype=float)
    f[~np.isfinite(f)] = np.inf
    return f


def optimize(config: BsaConfig, fitness: Callable[[np.ndarray], float],
             vectorized: bool = False, rng: Optional[np.random.Generator] = None) -> BsaResult:
    """Run BSA and return the best individual found.

    Parameters
    ----------
    config : BsaConfig
        Population size, iteration count, amplitude ``eta`` and box bounds.
    fitness : callable
        Maps a position vector to a scalar. With ``vectorized=True`` it maps
        a ``(population, dim)`` array to a ``(population,)`` array instead.
        Non-finite values are treated as ``+inf``.
    rng : numpy Generator, optional
        Overrides ``config.seed``.

    Exactly ``population_size * (iterations + 1)`` evaluations are made.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n, d = config.population_size, config.dim
    low = np.array([b[0] for b in config.bounds])
    high = np.array([b[1] for b in config.bounds])
    rows = np.arange(n)

    pop = rng.uniform(low, high, (n, d))
    old_pop = rng.uniform(low, high, (n, d))
    fit = _evaluate(fitness, pop, vectorized)
    if np.all(np.isinf(fit)):
        raise DegenerateProblemError("no finite fitness in the initial population")
    evaluations = n

    best = int(np.argmin(fit))
    best_pos, best_fit = pop[best].copy(), float(fit[best])
    history = np.empty(config.iterations + 1)
    history[0] = best_fit

    for it in range(1, config.iterations + 1):
        # selection-I: maybe refresh the historical population, then shuffle it
        a, b = rng.random(2)
        if a < b:
            old_pop = pop.copy()
        old_pop = old_pop[rng.permutation(n)]

        scale = config.eta * rng.standard_normal()

        # crossover map: many random dims or a single one, chosen per generation
        a, b = rng.random(2)
        mask = np.zeros((n, d), dtype=bool)
        if a < b:
            counts = np.maximum(np.ceil(config.mixrate * rng.random(n) * d), 1).astype(int)
            ranks = rng.random((n, d)).argsort(axis=1).argsort(axis=1)
            mask = ranks < counts[:, None]
        else:
            mask[rows, rng.integers(d, size=n)] = True

        trial = np.where(mask, pop + scale * (old_pop - pop), pop)
        regen = rng.uniform(low, high, (n, d))
        outside = (trial < low) | (trial > high)
        trial[outside] = regen[outside]

        trial_fit = _evaluate(fitness, trial, vectorized)
        evaluations += n

        # selection-II: strict improvement only
        better = trial_fit < fit
        pop[better] = trial[better]
        fit[better] = trial_fit[better]
        best = int(np.argmin(fit))
        if fit[best] < best_fit:
            best_pos, best_fit = pop[best].copy(), float(fit[best])
        history[it] = best_fit

    return BsaResult(best_pos, best_fit, history, evaluations)
