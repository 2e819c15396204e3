"""Stateful interpretation of a genome as a gradient-descent optimizer.

The engine owns all per-parameter mutable state (EMA banks, state-op
registers, momentum slot) and applies the three momentum wrappings around the
graph-computed update U. It depends only on the structural shape of genomes,
never on the genome module itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .schedules import Clock, eval_decay_graph


@dataclass
class OptimizerState:
    """All mutable optimizer state for one parameter tensor."""

    v_hat: np.ndarray
    s_hat: np.ndarray
    l_hat: np.ndarray
    v_bank: list
    s_bank: list
    l_bank: list
    node_regs: dict           # state-op node id -> persistent register tensor
    momentum_slot: np.ndarray
    step: int = 0
    rng_seed: int = 0


@dataclass
class StepReport:
    update_norm: float
    nonfinite_flag: bool
    decay_values: dict = field(default_factory=dict)  # (node id, slot) -> scalar


def init_state(genome, shape, rng_seed: int = 0) -> OptimizerState:
    """Zero-initialized state; registers allocated for every state op present."""
    z = lambda: np.zeros(shape, dtype=np.float64)
    regs = {n.id: z() for n in genome.graph.nodes() if ops.is_state_op(n.op)}
    return OptimizerState(
        v_hat=z(), s_hat=z(), l_hat=z(),
        v_bank=[z() for _ in ops.BANK_BETAS_V],
        s_bank=[z() for _ in ops.BANK_BETAS_S],
        l_bank=[z() for _ in ops.BANK_BETAS_L],
        node_regs=regs, momentum_slot=z(), rng_seed=rng_seed,
    )


def update_emas(state: OptimizerState, g: np.ndarray) -> OptimizerState:
    """Advance all exponential moving averages with the new gradient."""
    g2, g3 = g * g, g * g * g
    state.v_hat = ops.BETA1 * state.v_hat + (1.0 - ops.BETA1) * g
    state.s_hat = ops.BETA2 * state.s_hat + (1.0 - ops.BETA2) * g2
    state.l_hat = ops.BETA3 * state.l_hat + (1.0 - ops.BETA3) * g3
    for bank, betas, term in ((state.v_bank, ops.BANK_BETAS_V, g),
                              (state.s_bank, ops.BANK_BETAS_S, g2),
                              (state.l_bank, ops.BANK_BETAS_L, g3)):
        for j, beta in enumerate(betas):
            bank[j] = beta * bank[j] + (1.0 - beta) * term
    return state


def _avg_bank(bank, betas, term):
    return sum(b * v for b, v in zip(betas, bank)) / 3.0 - term


def operand_value(tag: str, g, w, state: OptimizerState):
    if tag == "g":
        return g
    if tag == "g2":
        return g * g
    if tag == "g3":
        return g * g * g
    if tag == "v_hat":
        return state.v_hat
    if tag == "s_hat":
        return state.s_hat
    if tag == "l_hat":
        return state.l_hat
    if tag == "sign_g":
        return np.sign(g)
    if tag == "sign_v":
        return np.sign(state.v_hat)
    if tag == "one":
        return np.ones_like(g)
    if tag == "two":
        return np.full_like(g, 2.0)
    if tag == "wd_1e6":
        return 1e-6 * w
    if tag == "wd_1e5":
        return 1e-5 * w
    if tag == "wd_1e4":
        return 1e-4 * w
    if tag == "wd_1e3":
        return 1e-3 * w
    if tag == "mix_g_v":
        return 0.3 * g + 0.7 * state.v_hat
    if tag == "mix_g2_s":
        return 0.05 * g * g + 0.95 * state.s_hat
    if tag == "mix_g3_l":
        return 0.01 * g ** 3 + 0.99 * state.l_hat
    if tag == "avg_v":
        return _avg_bank(state.v_bank, ops.BANK_BETAS_V, g)
    if tag == "avg_s":
        return _avg_bank(state.s_bank, ops.BANK_BETAS_S, g * g)
    if tag == "avg_l":
        return _avg_bank(state.l_bank, ops.BANK_BETAS_L, g ** 3)
    raise ValueError(f"unknown operand {tag!r}")


def _drop(x, p, rng):
    # inverted dropout: survivors rescaled so the expectation is preserved
    mask = rng.random(np.shape(x)) >= p
    return x * mask / (1.0 - p)


def eval_op(op: str, x1, x2=None, reg=None, rng=None):
    """Evaluate one op; returns (value, new_register_or_None)."""
    if ops.is_state_op(op):
        new_reg = ops.STATE_KERNELS[op](x1, reg)
        return new_reg, new_reg
    if ops.is_drop_op(op):
        return _drop(x1, ops.DROP_RATES[op], rng), None
    if op in ops.BINARY_KERNELS:
        return ops.BINARY_KERNELS[op](x1, x2), None
    return ops.UNARY_KERNELS[op](x1), None


def compute_update(genome, state: OptimizerState, g, w, clock: Clock):
    """Evaluate the active subgraph and return (U, StepReport).

    EMAs must already be updated for this step. Each edge's value is scaled
    by its decay graph evaluated at `clock` before feeding the consuming
    node; state-op registers advance exactly once regardless of fan-out.
    """
    graph = genome.graph
    active = graph.active_ids()
    cache = {}
    decay_values = {}

    def node_rng(nid):
        return np.random.default_rng([state.rng_seed, state.step, nid])

    def input_value(node, slot):
        ref = node.inputs[slot]
        v = operand_value(ref, g, w, state) if isinstance(ref, str) else cache[ref]
        if node.decays and node.decays[slot] is not None:
            d = eval_decay_graph(node.decays[slot], clock)
            decay_values[(node.id, slot)] = d
            v = v * d
        return v

    def run(node):
        args = [input_value(node, s) for s in range(node.arity())]
        val, new_reg = eval_op(node.op, *args,
                               reg=state.node_regs.get(node.id),
                               rng=node_rng(node.id) if ops.is_drop_op(node.op) else None)
        if new_reg is not None:
            state.node_regs[node.id] = new_reg
        cache[node.id] = val
        return val

    # degenerate graphs may overflow; nonfinite results are reported, not raised
    with np.errstate(all="ignore"):
        for node in graph.hidden:
            if node.id in active:
                run(node)
        u = run(graph.output)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != np.shape(g):
        u = np.broadcast_to(u, np.shape(g)).copy()
    finite = bool(np.all(np.isfinite(u)))
    norm = float(np.linalg.norm(u)) if finite else math.inf
    return u, StepReport(norm, not finite, decay_values)


def momentum_coefficient(clock: Clock) -> float:
    """Momentum beta cycled between 0.85 and 0.95 over the horizon."""
    return 0.90 + 0.05 * math.cos(2.0 * math.pi * clock.t / clock.T)


def step_with_report(genome, state: OptimizerState, w, g, alpha: float, clock: Clock):
    """apply_step variant that also returns the raw update and its report."""
    # degenerate genomes may overflow; nonfinite results are reported, not raised
    with np.errstate(all="ignore"):
        update_emas(state, g)
        u, report = compute_update(genome, state, g, w, clock)
        if genome.momentum == "none":
            new_w = w - alpha * u
        else:
            beta = momentum_coefficient(clock)
            z = beta * state.momentum_slot - alpha * u
            state.momentum_slot = z
            if genome.momentum == "momentum":
                new_w = w + z
            else:  # nesterov
                new_w = w + beta * z - alpha * u
        state.step += 1
        return new_w, u, report


def apply_step(genome, state: OptimizerState, w, g, alpha: float, clock: Clock):
    """One optimizer step: update EMAs, compute U, apply the momentum form."""
    new_w, _, _ = step_with_report(genome, state, w, g, alpha, clock)
    return new_w
