"""Cheap degeneracy filters run before any fitness evaluation.

Genomes must achieve moderate convergence on a shifted sphere problem at some
learning rate; decay graphs must stay inside [0, 1] across the whole horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .schedules import Clock, eval_decay_graph

DEFAULT_LR_SET = (10.0, 1.0, 0.1, 0.01, 0.001, 1e-4, 1e-5)

_RANGE_EPS = 1e-12


def _default_shifts() -> np.ndarray:
    return np.random.default_rng(0).uniform(-2.0, 2.0, size=100)


@dataclass
class SphereConfig:
    n: int = 100
    shifts: np.ndarray = field(default_factory=_default_shifts)
    x0: float = 0.0
    iters: int = 200
    lr_set: tuple = DEFAULT_LR_SET
    pass_ratio: float = 0.1

    def __post_init__(self):
        if self.iters <= 0 or not self.lr_set:
            raise ValueError("iters must be positive and lr_set nonempty")
        if not 0.0 < self.pass_ratio < 1.0:
            raise ValueError("pass_ratio must lie in (0, 1)")
        self.shifts = np.asarray(self.shifts, dtype=np.float64)[: self.n]


@dataclass
class IntegrityVerdict:
    passed: bool
    best_final_loss: float
    best_lr: float
    per_lr_loss: dict = field(default_factory=dict)


def _sphere_loss(x, shifts) -> float:
    d = x - shifts
    return float(d @ d)


def sphere_check(genome, cfg: SphereConfig | None = None) -> IntegrityVerdict:
    """Run the genome on the shifted sphere at every learning rate.

    Passes if any learning rate drives the final loss below
    pass_ratio * f(x0). Nonfinite trajectories count as failures for that
    learning rate; degenerate genomes fail, they never raise.
    """
    cfg = cfg or SphereConfig()
    f0 = _sphere_loss(np.full(cfg.n, cfg.x0), cfg.shifts)
    best_loss, best_lr = np.inf, cfg.lr_set[0]
    per_lr = {}
    for lr in cfg.lr_set:
        x = np.full(cfg.n, cfg.x0, dtype=np.float64)
        state = engine.init_state(genome, (cfg.n,))
        diverged = False
        with np.errstate(all="ignore"):
            for i in range(cfg.iters):
                g = 2.0 * (x - cfg.shifts)
                x = engine.apply_step(genome, state, x, g, lr, Clock(i, cfg.iters))
                if not np.all(np.isfinite(x)):
                    diverged = True
                    break
            loss = np.inf if diverged else _sphere_loss(x, cfg.shifts)
        per_lr[lr] = loss
        if loss < best_loss:
            best_loss, best_lr = loss, lr
    passed = bool(best_loss < cfg.pass_ratio * f0)
    return IntegrityVerdict(passed, best_loss, best_lr, per_lr)


def decay_range_check(dg, grid: int = 100) -> bool:
    """True iff the decay graph stays within [0, 1] at every grid step."""
    if grid < 2:
        raise ValueError("grid must be at least 2")
    for t in range(grid + 1):
        v = eval_decay_graph(dg, Clock(t, grid))
        if not np.isfinite(v) or v < -_RANGE_EPS or v > 1.0 + _RANGE_EPS:
            return False
    return True
