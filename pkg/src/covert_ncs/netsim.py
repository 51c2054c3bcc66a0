"""Closed-loop networked control system with a man-in-the-middle hook.

The loop is advanced one sample at a time::

    r --(+)--> C --[forward MitM]--> G --[feedback MitM]--+
        ^-                                                 |
        +--------------------------------------------------+

Network delay is zero. The eavesdropper sees the forward stream ``u`` and
the feedback stream ``y`` through independent lossy channels.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .lti import DIVERGENCE_LIMIT, DivergenceError, TransferFunction, closed_loop, is_stable, series

CANONICAL_CONTROLLER = TransferFunction([0.1701, -0.1673], [1.0, -1.0])
CANONICAL_PLANT = TransferFunction([0.3379, 0.2793], [1.0, -1.5462, 0.5646])
CANONICAL_SAMPLE_RATE = 50.0


class _Section:
    """Stateful direct-form realization of one transfer function."""

    def __init__(self, tf: TransferFunction):
        self.b = [float(c) for c in tf.padded_num()]
        self.a = [float(c) for c in tf.den]
        self.xh = [0.0] * (len(self.a) - 1)
        self.yh = [0.0] * (len(self.a) - 1)
        self.strictly_proper = self.b[0] == 0.0

    def output(self, x: float) -> float:
        acc = 0.0
        acc += self.b[0] * x
        for j in range(1, len(self.b)):
            acc += self.b[j] * self.xh[j - 1]
        for j in range(1, len(self.a)):
            acc -= self.a[j] * self.yh[j - 1]
        return acc

    def push(self, x: float, y: float) -> None:
        if self.xh:
            self.xh.insert(0, x)
            self.xh.pop()
            self.yh.insert(0, y)
            self.yh.pop()


@dataclass(frozen=True)
class NcsModel:
    controller: TransferFunction = CANONICAL_CONTROLLER
    plant: TransferFunction = CANONICAL_PLANT
    sample_rate: float = CANONICAL_SAMPLE_RATE
    setpoint: float = 1.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not is_stable(closed_loop(series(self.controller, self.plant))):
            raise ValueError("unattacked closed loop is unstable")

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate

    def n_samples(self, duration: float) -> int:
        if not duration > 0:
            raise ValueError("duration must be positive")
        return int(round(duration * self.sample_rate))


@dataclass
class SignalTrace:
    values: np.ndarray
    lost: np.ndarray
    sample_period: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.lost is None:
            self.lost = np.zeros(self.values.shape, dtype=bool)
        self.lost = np.asarray(self.lost, dtype=bool)
        if self.values.shape != self.lost.shape or self.values.ndim != 1:
            raise ValueError("values and lost mask must be 1-D and of equal length")

    def __len__(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.values.size) * self.sample_period


@dataclass(frozen=True)
class LossModel:
    rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("loss rate must lie in [0, 1]")


@dataclass
class LoopRun:
    r: SignalTrace
    u: SignalTrace
    u_prime: SignalTrace
    y: SignalTrace
    mitm_side: str = "forward"
    attacked: bool = field(default=False)


def run_loop(model: NcsModel, duration: float, mitm: Optional[TransferFunction] = None,
             mitm_side: Literal["forward", "feedback"] = "forward") -> LoopRun:
    """Simulate the closed loop from rest under a step setpoint.

    ``u_prime`` is the forward stream after the MitM; with a feedback-side
    MitM it equals ``u`` and the controller sees ``M(y)`` instead of ``y``.

    Raises ``DivergenceError`` when the (attacked) loop blows up.
    """
    if mitm_side not in ("forward", "feedback"):
        raise ValueError(f"mitm_side must be 'forward' or 'feedback', got {mitm_side!r}")
    n = model.n_samples(duration)
    identity = TransferFunction.identity()
    m_fwd = mitm if (mitm is not None and mitm_side == "forward") else identity
    m_fb = mitm if (mitm is not None and mitm_side == "feedback") else identity

    blocks = [_Section(model.controller), _Section(m_fwd), _Section(model.plant), _Section(m_fb)]
    start = next((i for i, blk in enumerate(blocks) if blk.strictly_proper), None)
    if start is None:
        raise ValueError("algebraic loop: no strictly proper block in the loop")
    order = [(start + i) % 4 for i in range(4)]

    r = np.full(n, float(model.setpoint))
    out = np.zeros((4, n))
    for k in range(n):
        sig = None
        for pos, idx in enumerate(order):
            blk = blocks[idx]
            if pos == 0:
                x_in = None
                val = blk.output(0.0)
            else:
                x_in = sig if idx != 0 else r[k] - sig
                val = blk.output(x_in)
                blk.push(x_in, val)
            if not abs(val) <= DIVERGENCE_LIMIT:
                raise DivergenceError(k)
            out[idx, k] = val
            sig = val
        # the first block's input is known only after closing the loop
        first = order[0]
        upstream = out[(first - 1) % 4, k]
        blocks[first].push(r[k] - upstream if first == 0 else upstream, out[first, k])

    dt = model.sample_period
    u, u_prime, y_plant = out[0], out[1], out[2]
    return LoopRun(
        r=SignalTrace(r, None, dt),
        u=SignalTrace(u.copy(), None, dt),
        u_prime=SignalTrace(u_prime.copy(), None, dt),
        y=SignalTrace(y_plant.copy(), None, dt),
        mitm_side=mitm_side,
        attacked=mitm is not None,
    )


def hold_last(values: Sequence[float], lost: Sequence[bool]) -> np.ndarray:
    """Replace each lost sample with the previous reconstructed value (0 before the first)."""
    values = np.asarray(values, dtype=float)
    lost = np.asarray(lost, dtype=bool)
    if values.shape != lost.shape:
        raise ValueError("values and lost mask must have equal length")
    out = values.copy()
    prev = 0.0
    for k in range(out.size):
        if lost[k]:
            out[k] = prev
        prev = out[k]
    return out


def loss_masks(n: int, loss: LossModel) -> tuple[np.ndarray, np.ndarray]:
    """Independent forward/feedback loss masks; a sample is lost with probability ``rate``."""
    fwd_seq, fb_seq = np.random.SeedSequence(loss.seed).spawn(2)
    lost_fwd = np.random.default_rng(fwd_seq).random(n) < loss.rate
    lost_fb = np.random.default_rng(fb_seq).random(n) < loss.rate
    return lost_fwd, lost_fb


def eavesdrop(run: LoopRun, loss: LossModel) -> tuple[SignalTrace, SignalTrace]:
    """Attacker's hold-reconstructed copies of the forward (``u``) and feedback (``y``) streams."""
    n = len(run.u)
    lost_fwd, lost_fb = loss_masks(n, loss)
    dt = run.u.sample_period
    i_trace = SignalTrace(hold_last(run.u.values, lost_fwd), lost_fwd, dt)
    o_trace = SignalTrace(hold_last(run.y.values, lost_fb), lost_fb, dt)
    return i_trace, o_trace


def write_trace_csv(path, run: LoopRun, lost_fwd: Optional[np.ndarray] = None,
                    lost_fb: Optional[np.ndarray] = None) -> None:
    n = len(run.y)
    lost_fwd = np.zeros(n, dtype=bool) if lost_fwd is None else lost_fwd
    lost_fb = np.zeros(n, dtype=bool) if lost_fb is None else lost_fb
    dt = run.y.sample_period
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", "r", "u", "u_prime", "y", "lost_fwd", "lost_fb"])
        for k in range(n):
            w.writerow([
                k, f"{k * dt:.6f}",
                repr(float(run.r.values[k])), repr(float(run.u.values[k])),
                repr(float(run.u_prime.values[k])), repr(float(run.y.values[k])),
                int(lost_fwd[k]), int(lost_fb[k]),
            ])


def read_trace_csv(path) -> dict[str, np.ndarray]:
    cols: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for key, val in row.items():
                cols.setdefault(key, []).append(val)
    return {
        key: np.asarray(vals, dtype=int if key in ("k", "lost_fwd", "lost_fb") else float)
        for key, vals in cols.items()
    }
