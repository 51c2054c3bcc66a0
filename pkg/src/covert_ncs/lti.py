"""Discrete-time LTI transfer functions.

Coefficients are stored in descending powers of ``z``. A plant such as
``(0.3379 z + 0.2793) / (z^2 - 1.5462 z + 0.5646)`` is written
``TransferFunction([0.3379, 0.2793], [1, -1.5462, 0.5646])``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Magnitude beyond which a simulated signal is declared divergent.
DIVERGENCE_LIMIT = 1e10

#: Roots closer than this are cancelled when cascading transfer functions.
CANCEL_TOL = 1e-9


class DivergenceError(ArithmeticError):
    """Simulation left the representable/bounded range."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"simulation diverged at sample {index}")


class PoleAtOneError(ZeroDivisionError):
    """Denominator vanishes at z = 1 (integrator present)."""


class NotSettledError(ValueError):
    """Step response still moving at the end of the horizon."""


class RootFindingError(ArithmeticError):
    pass


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return np.zeros(1)
    return coeffs[nz[0]:]


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function ``num(z) / den(z)`` with monic ``den``."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __init__(self, num: Sequence[float], den: Sequence[float] = (1.0,)):
        num_t = tuple(float(c) for c in np.atleast_1d(num))
        den_t = tuple(float(c) for c in np.atleast_1d(den))
        if not den_t:
            raise ValueError("denominator must be non-empty")
        if not num_t:
            raise ValueError("numerator must be non-empty")
        if den_t[0] != 1.0:
            raise ValueError(f"denominator must be monic, got leading coefficient {den_t[0]!r}")
        if len(num_t) > len(den_t):
            raise ValueError("transfer function is improper (len(num) > len(den))")
        if not all(math.isfinite(c) for c in num_t + den_t):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "num", num_t)
        object.__setattr__(self, "den", den_t)

    @classmethod
    def normalized(cls, num: Sequence[float], den: Sequence[float]) -> "TransferFunction":
        """Build from arbitrary polynomials, stripping leading zeros and scaling ``den`` to monic."""
        num_a = _trim(np.asarray(num, dtype=float))
        den_a = _trim(np.asarray(den, dtype=float))
        if not np.any(den_a):
            raise ZeroDivisionError("denominator polynomial is identically zero")
        lead = den_a[0]
        return cls(num_a / lead, den_a / lead)

    @classmethod
    def gain(cls, k: float) -> "TransferFunction":
        return cls([k], [1.0])

    @classmethod
    def identity(cls) -> "TransferFunction":
        return cls.gain(1.0)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def is_strictly_proper(self) -> bool:
        return self.padded_num()[0] == 0.0

    def padded_num(self) -> np.ndarray:
        """Numerator left-padded with zeros to the length of ``den``."""
        b = np.zeros(len(self.den))
        b[len(self.den) - len(self.num):] = self.num
        return b

    def __call__(self, z: complex) -> complex:
        return np.polyval(self.num, z) / np.polyval(self.den, z)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return series(self, other)


@dataclass(frozen=True)
class StepMetrics:
    final_value: float
    peak_value: float
    peak_index: int
    overshoot_pct: float
    steady_state_error_pct: float


def _direct_form(b: np.ndarray, a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Direct-form recursion over a batch of systems sharing one input.

    ``b`` and ``a`` are ``(batch, order + 1)`` with ``b`` already padded.
    Summation order matches :class:`covert_ncs.netsim._Section` exactly so
    structural and batched simulations agree bit for bit.
    """
    n = u.shape[0]
    batch, width = a.shape
    x = np.zeros((batch, n))
    for j in range(width):
        if j < n:
            x[:, j:] += b[:, j:j + 1] * u[:n - j]
    yt = np.zeros((n, batch))
    xt = np.ascontiguousarray(x.T)
    neg_a = -a[:, 1:].T
    with np.errstate(all="ignore"):
        for k in range(n):
            acc = xt[k].copy()
            for j in range(1, min(width, k + 1)):
                acc += neg_a[j - 1] * yt[k - j]
            yt[k] = acc
    return yt.T


def simulate_batch(num: np.ndarray, den: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Simulate many candidate systems on one input; no divergence checking.

    ``num`` is ``(batch, n_num)`` and ``den`` is ``(batch, n_den)`` with
    monic rows. Divergent rows come back with huge or non-finite values.
    """
    num = np.atleast_2d(np.asarray(num, dtype=float))
    den = np.atleast_2d(np.asarray(den, dtype=float))
    b = np.zeros_like(den)
    b[:, den.shape[1] - num.shape[1]:] = num
    return _direct_form(b, den, np.asarray(u, dtype=float))


def simulate(tf: TransferFunction, u: Sequence[float]) -> np.ndarray:
    """Response of ``tf`` to ``u`` from zero initial conditions.

    Raises
    ------
    DivergenceError
        If any sample is non-finite or exceeds :data:`DIVERGENCE_LIMIT`.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("input must be a non-empty 1-D sequence")
    y = _direct_form(tf.padded_num()[None, :], np.asarray(tf.den)[None, :], u)[0]
    bad = ~(np.abs(y) <= DIVERGENCE_LIMIT)
    if bad.any():
        raise DivergenceError(int(np.argmax(bad)))
    return y


def _roots(p: np.ndarray) -> np.ndarray:
    p = _trim(np.asarray(p, dtype=float))
    if p.size <= 1:
        return np.zeros(0, dtype=complex)
    try:
        r = np.roots(p)
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(str(exc)) from exc
    return r.astype(complex)


def _cancel_common(zeros: list[complex], poles_: list[complex]) -> tuple[list[complex], list[complex], bool]:
    zeros, poles_ = list(zeros), list(poles_)
    cancelled = False
    i = 0
    while i < len(zeros):
        hit = next((j for j, p in enumerate(poles_) if abs(zeros[i] - p) < CANCEL_TOL), None)
        if hit is None:
            i += 1
            continue
        zeros.pop(i)
        poles_.pop(hit)
        cancelled = True
    return zeros, poles_, cancelled


def series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    """Cascade ``a`` then ``b``; exactly coincident pole/zero pairs are removed."""
    num = np.polymul(a.num, b.num)
    den = np.polymul(a.den, b.den)
    num_t = _trim(num)
    if not np.any(num_t):
        return TransferFunction.normalized(num_t, den)
    zeros, pols, cancelled = _cancel_common(list(_roots(num_t)), list(_roots(den)))
    if not cancelled:
        return TransferFunction.normalized(num_t, den)
    new_num = num_t[0] * np.real(np.poly(zeros)) if zeros else np.array([num_t[0]])
    new_den = np.real(np.poly(pols)) if pols else np.array([1.0])
    return TransferFunction.normalized(new_num, new_den)


def closed_loop(open_loop: TransferFunction) -> TransferFunction:
    """Unity negative feedback around ``open_loop``: ``L / (1 + L)``."""
    b = open_loop.padded_num()
    den = np.asarray(open_loop.den) + b
    if not np.any(den):
        raise ZeroDivisionError("closed-loop denominator is identically zero")
    return TransferFunction.normalized(b, den)


def dc_gain(tf: TransferFunction) -> float:
    den1 = float(np.sum(tf.den))
    if den1 == 0.0:
        raise PoleAtOneError("denominator vanishes at z = 1")
    return float(np.sum(tf.num)) / den1


def poles(tf: TransferFunction) -> list[complex]:
    """Roots of the denominator, with multiplicity.

    Degrees one and two use closed forms; higher degrees use the companion
    matrix eigenvalues.
    """
    den = tf.den
    if len(den) < 2:
        raise ValueError("denominator has degree zero; no poles")
    if len(den) == 2:
        return [complex(-den[1])]
    if len(den) == 3:
        b, c = den[1], den[2]
        disc = cmath.sqrt(b * b - 4.0 * c)
        # numerically stable pairing
        q = -0.5 * (b + (disc if b >= 0 else -disc))
        if q == 0:
            return [0j, 0j]
        return [complex(q), complex(c / q)]
    return list(_roots(np.asarray(den)))


def is_stable(tf: TransferFunction) -> bool:
    if tf.order == 0:
        return True
    return all(abs(p) < 1.0 for p in poles(tf))


def step_metrics(response: Sequence[float], setpoint: float = 1.0, window: float = 0.05,
                 settle_tol: float = 1e-3) -> StepMetrics:
    """Overshoot and steady-state error of a settled step response.

    The final value is the mean of the last ``window`` fraction of samples;
    the response counts as settled when that window's range is below
    ``settle_tol * |setpoint|``.
    """
    y = np.asarray(response, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("response must be a non-empty 1-D sequence")
    if setpoint == 0:
        raise ValueError("setpoint must be non-zero")
    tail = y[-max(1, int(round(window * y.size))):]
    spread = float(np.ptp(tail))
    if not spread < settle_tol * abs(setpoint):
        raise NotSettledError(f"tail range {spread:.3g} exceeds {settle_tol * abs(setpoint):.3g}")
    final = float(np.mean(tail))
    peak_index = int(np.argmax(y))
    peak = float(y[peak_index])
    overshoot = 100.0 * (peak - final) / abs(final) if final != 0 else 0.0
    return StepMetrics(
        final_value=final,
        peak_value=peak,
        peak_index=peak_index,
        overshoot_pct=max(overshoot, 0.0),
        steady_state_error_pct=100.0 * (final - setpoint) / setpoint,
    )
