"""Decay schedule primitives, decay-graph evaluation, and learning-rate curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import ops

# Epsilon guard: schedule values are clamped into [0, 1] only to absorb
# floating-point overshoot (e.g. cos roundoff yielding 1 + 1e-17).
_CLAMP_EPS = 1e-12

# One-cycle defaults: 6,400 warmup and 12,800 hold steps out of 96,000.
DEFAULT_WARM_FRAC = 6400 / 96000
DEFAULT_HOLD_FRAC = 12800 / 96000


@dataclass(frozen=True)
class Clock:
    """Current step t within a horizon of T steps."""

    t: float
    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not 0 <= self.t <= self.T:
            raise ValueError(f"t={self.t} outside [0, {self.T}]")


def _clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def eval_schedule(tag: str, clock: Clock) -> float:
    """Evaluate one of the 14 primitive schedules; result lies in [0, 1]."""
    t, T = clock.t, clock.T
    r = t / T
    rr = (2.0 * t) % T / T  # restart phase, period T/2; wraps to 0 at t = T
    if tag == "ld":
        v = 1.0 - r
    elif tag == "li":
        v = r
    elif tag == "ldr":
        v = 1.0 - rr
    elif tag == "lir":
        v = rr
    elif tag == "cd":
        v = 0.5 * (1.0 + math.cos(math.pi * r))
    elif tag == "ci":
        v = 0.5 * (1.0 - math.cos(math.pi * r))
    elif tag == "cdr":
        v = 0.5 * (1.0 + math.cos(math.pi * rr))
    elif tag == "cir":
        v = 0.5 * (1.0 - math.cos(math.pi * rr))
    elif tag == "ccd":
        v = 0.5 * (1.0 + math.cos(2.0 * math.pi * r))
    elif tag == "cci":
        v = 0.5 * (1.0 - math.cos(2.0 * math.pi * r))
    elif tag == "ed":
        v = 0.01 ** r
    elif tag == "ei":
        v = 1.0 - 0.01 ** r
    elif tag == "dd":
        v = 0.95 * (1.0 - r) / (0.05 + 0.95 * (1.0 - r))
    elif tag == "di":
        v = 0.95 - 0.95 * (1.0 - r) / (0.05 + 0.95 * (1.0 - r))
    else:
        raise ValueError(f"unknown schedule tag {tag!r}")
    return _clamp01(v)


def eval_decay_graph(dg, clock: Clock) -> float:
    """Evaluate a decay graph at `clock`.

    Operand leaves are schedule values; node ops are applied in index order.
    Only active nodes (those feeding the output) are evaluated; the decay op
    set is deterministic, so no RNG is needed.
    """
    cache = {}

    def resolve(ref):
        if isinstance(ref, str):
            return eval_schedule(ref, clock)
        return cache[ref]

    def run(node):
        args = [resolve(ref) for ref in node.inputs]
        if node.op in ops.BINARY_KERNELS:
            val = ops.BINARY_KERNELS[node.op](*args)
        else:
            val = ops.UNARY_KERNELS[node.op](args[0])
        cache[node.id] = val
        return val

    active = dg.active_ids()
    for node in dg.hidden:
        if node.id in active:
            run(node)
    return float(run(dg.output))


def one_cycle(clock: Clock, warm_frac: float = DEFAULT_WARM_FRAC,
              hold_frac: float = DEFAULT_HOLD_FRAC) -> float:
    """Base LR multiplier: linear ramp 0->1, hold at 1, cosine decay 1->0."""
    if warm_frac + hold_frac > 1.0:
        raise ValueError("warm_frac + hold_frac must be <= 1")
    t, T = clock.t, clock.T
    warm_end = warm_frac * T
    hold_end = (warm_frac + hold_frac) * T
    if t < warm_end:
        return t / warm_end if warm_end > 0 else 1.0
    if t <= hold_end:
        return 1.0
    span = T - hold_end
    if span <= 0:
        return 1.0
    return _clamp01(0.5 * (1.0 + math.cos(math.pi * (t - hold_end) / span)))


def _div(a: float, b: float) -> float:
    # same totalized division convention as the update-graph div op
    return a / (b + ops.EPS)


def _lr_shape(name: str, clock: Clock) -> float:
    s = lambda tag: eval_schedule(tag, clock)
    if name == "LR1":
        return _div(special.erfc(special.erfc(s("ci"))), ops.tanh_grad(s("cir")))
    if name == "LR2":
        return _div(special.erfc(special.erfc(s("ci"))),
                    ops.tanh_grad(s("cir")) * ops.tanh_grad(s("ci")))
    if name == "LR3":
        return _div(math.atan(s("li")),
                    ops.tanh_grad(s("lir")) * math.sqrt(ops.softsign_grad(s("di"))))
    if name == "LR4":
        return _div(ops.sigmoid(s("li")) ** 2, ops.sigmoid(2.0 * ops.softsign(s("ld"))))
    if name == "LR5":
        return _div(1.0, math.sqrt(special.erf(s("ed"))))
    if name == "LR6":
        return _div(math.atan(s("li")) * special.erfc(s("cci")),
                    math.sqrt(ops.softsign_grad(s("cci"))))
    if name == "LR7":
        return _div(1.0, math.sqrt(ops.softsign_grad(s("lir"))))
    if name == "LR8":
        return _div(1.0, math.sqrt(ops.softsign(math.atan(s("ei")))))
    if name == "LR9":
        return math.tanh(max(s("cci"), s("lir")))
    raise ValueError(f"unknown learning-rate schedule {name!r}")


LR_NAMES = tuple(f"LR{i}" for i in range(1, 10))


def catalog_lr(name: str, clock: Clock, warm_frac: float = DEFAULT_WARM_FRAC,
               hold_frac: float = DEFAULT_HOLD_FRAC) -> float:
    """Discovered LR curve: closed-form shape times the one-cycle base factor."""
    base = one_cycle(clock, warm_frac, hold_frac)
    if base == 0.0:
        return 0.0
    return _lr_shape(name, clock) * base


def schedule_table(T: int, points: int | None = None) -> tuple[list[str], np.ndarray]:
    """Dense table of all 14 schedules; returns (column names, array [points x 15])."""
    steps = np.arange(T + 1) if points is None else np.linspace(0, T, points)
    rows = np.empty((len(steps), len(ops.SCHEDULE_TAGS) + 1))
    for i, t in enumerate(steps):
        rows[i, 0] = t
        clock = Clock(float(t), float(T))
        for j, tag in enumerate(ops.SCHEDULE_TAGS):
            rows[i, j + 1] = eval_schedule(tag, clock)
    return ["t", *ops.SCHEDULE_TAGS], rows
