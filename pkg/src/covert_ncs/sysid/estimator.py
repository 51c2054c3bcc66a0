"""Grey-box transfer-function estimator driven by BSA."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_consistent_length, check_is_fitted, column_or_1d

from ..bsa import BsaConfig, optimize
from ..lti import TransferFunction, simulate, simulate_batch


@dataclass(frozen=True)
class ModelTemplate:
    """Known structure of the device being identified.

    ``fixed_num`` lists all ``num_degree + 1`` numerator coefficients and
    ``fixed_den`` the ``den_degree`` non-leading denominator coefficients;
    ``None`` (or NaN) marks a free entry, ``None`` for the whole field means
    everything is free. Free coefficients are laid out numerator first.
    """

    num_degree: int
    den_degree: int
    fixed_num: Optional[tuple] = None
    fixed_den: Optional[tuple] = None
    bounds: tuple = ((-10.0, 10.0),)

    def __post_init__(self):
        if self.num_degree < 0 or self.den_degree < self.num_degree:
            raise ValueError("need 0 <= num_degree <= den_degree")
        for name, want in (("fixed_num", self.num_degree + 1), ("fixed_den", self.den_degree)):
            val = getattr(self, name)
            if val is not None and len(val) != want:
                raise ValueError(f"{name} needs {want} entries")
        if len(self.bounds) not in (1, self.dim):
            raise ValueError(f"bounds needs 1 or {self.dim} (low, high) pairs")

    @classmethod
    def plant(cls, bounds=((-10.0, 10.0),)) -> "ModelTemplate":
        """``(g1 z + g2) / (z^2 + g3 z + g4)``."""
        return cls(1, 2, bounds=bounds)

    @classmethod
    def pi_controller(cls, bounds=((-10.0, 10.0),)) -> "ModelTemplate":
        """``(c1 z + c2) / (z - 1)``."""
        return cls(1, 1, fixed_den=(-1.0,), bounds=bounds)

    @staticmethod
    def _free(fixed, size) -> np.ndarray:
        if fixed is None:
            return np.ones(size, dtype=bool)
        return np.array([v is None or (isinstance(v, float) and math.isnan(v)) for v in fixed])

    @property
    def free_num(self) -> np.ndarray:
        return self._free(self.fixed_num, self.num_degree + 1)

    @property
    def free_den(self) -> np.ndarray:
        return self._free(self.fixed_den, self.den_degree)

    @property
    def dim(self) -> int:
        return int(self.free_num.sum() + self.free_den.sum())

    @property
    def search_bounds(self) -> tuple:
        return tuple(self.bounds) * self.dim if len(self.bounds) == 1 else tuple(self.bounds)

    def to_arrays(self, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batch of free-coefficient vectors -> ``(num, den)`` coefficient arrays."""
        positions = np.atleast_2d(positions)
        batch = positions.shape[0]
        fn, fd = self.free_num, self.free_den
        num = np.empty((batch, fn.size))
        den = np.empty((batch, fd.size + 1))
        den[:, 0] = 1.0
        n_free = int(fn.sum())
        num[:, fn] = positions[:, :n_free]
        den[:, 1:][:, fd] = positions[:, n_free:]
        if not fn.all():
            num[:, ~fn] = np.array([v for v, f in zip(self.fixed_num, fn) if not f], dtype=float)
        if not fd.all():
            den[:, 1:][:, ~fd] = np.array([v for v, f in zip(self.fixed_den, fd) if not f], dtype=float)
        return num, den

    def to_tf(self, position: Sequence[float]) -> TransferFunction:
        num, den = self.to_arrays(np.asarray(position, dtype=float))
        return TransferFunction(num[0], den[0])

    def from_tf(self, tf: TransferFunction) -> np.ndarray:
        """Free-coefficient vector of ``tf`` under this template."""
        num = np.zeros(self.num_degree + 1)
        num[num.size - len(tf.num):] = tf.num
        if len(tf.den) != self.den_degree + 1:
            raise ValueError("denominator degree does not match the template")
        return np.concatenate([num[self.free_num], np.asarray(tf.den[1:])[self.free_den]])


def prediction_error(template: ModelTemplate, u: np.ndarray, o: np.ndarray):
    """Vectorized fitness: mean squared output error of each candidate.

    Candidates whose simulation overflows score ``+inf``; merely unstable
    ones keep a large finite score so the population can still be ranked.
    """
    u = np.asarray(u, dtype=float)
    o = np.asarray(o, dtype=float)

    def fitness(positions: np.ndarray) -> np.ndarray:
        num, den = template.to_arrays(positions)
        y = simulate_batch(num, den, u)
        with np.errstate(all="ignore"):
            err = np.mean((o - y) ** 2, axis=1)
        err[~np.isfinite(err)] = np.inf
        return err

    return fitness


def _signal(x, name: str) -> np.ndarray:
    x = column_or_1d(np.asarray(x, dtype=float), warn=True)
    if x.size < 2:
        raise ValueError(f"{name} needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


class TransferFunctionEstimator(RegressorMixin, BaseEstimator):
    """Fit the free coefficients of a structured transfer function.

    ``X`` is the sampled input signal and ``y`` the sampled output, both
    1-D and of equal length. The fitness minimized is the mean squared
    difference between ``y`` and the candidate's zero-state response to
    ``X``.

    Parameters
    ----------
    template : ModelTemplate, default=None
        Structure of the model; ``None`` means a second-order plant with a
        first-order numerator.
    population_size, iterations, eta, mixrate :
        BSA settings, see :class:`covert_ncs.bsa.BsaConfig`.
    random_state : int, numpy Generator or None

    Attributes
    ----------
    coef_ : ndarray
        Best free-coefficient vector.
    tf_ : TransferFunction
    fitness_ : float
    history_ : ndarray
        Best fitness after each generation.
    """

    def __init__(self, template: Optional[ModelTemplate] = None, population_size: int = 100,
                 iterations: int = 800, eta: float = 1.0, mixrate: float = 1.0, random_state=None):
        self.template = template
        self.population_size = population_size
        self.iterations = iterations
        self.eta = eta
        self.mixrate = mixrate
        self.random_state = random_state

    def _template(self) -> ModelTemplate:
        return self.template if self.template is not None else ModelTemplate.plant()

    def fit(self, X, y):
        u = _signal(X, "X")
        o = _signal(y, "y")
        check_consistent_length(u, o)
        template = self._template()
        config = BsaConfig(self.population_size, self.iterations, self.eta,
                           template.search_bounds, self.mixrate, seed=None)
        rs = self.random_state
        rng = rs if isinstance(rs, np.random.Generator) else np.random.default_rng(rs)
        result = optimize(config, prediction_error(template, u, o), vectorized=True, rng=rng)
        self.coef_ = result.best_position
        self.tf_ = template.to_tf(result.best_position)
        self.fitness_ = result.best_fitness
        self.history_ = result.history
        self.n_evaluations_ = result.evaluations
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return simulate(self.tf_, _signal(X, "X"))
