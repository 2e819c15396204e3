"""Operand and operation registries shared by the update and decay graph spaces.

All kernels are totalized: domain restrictions are absorbed with epsilons or
clamps so that evaluating an arbitrary graph never raises. Degenerate results
(NaN/Inf) are detected downstream, not here.
"""

from __future__ import annotations

import numpy as np
from scipy import special

EPS = 1e-8
ATANH_CLAMP = 1e-7

# EMA coefficients for the v-hat / s-hat / lambda-hat averages of g, g^2, g^3.
BETA1 = 0.9
BETA2 = 0.99
BETA3 = 0.999

# Per-bank coefficients for the three averaged-momentum operands.
BANK_BETAS_V = (0.0, 0.9, 0.999)
BANK_BETAS_S = (0.0, 0.99, 0.999)
BANK_BETAS_L = (0.0, 0.999, 0.9999)


def sigmoid(x):
    return special.expit(x)


def sigmoid_grad(x):
    s = special.expit(x)
    return s * (1.0 - s)


def softsign(x):
    return x / (1.0 + np.abs(x))


def softsign_grad(x):
    return 1.0 / np.square(1.0 + np.abs(x))


def tanh_grad(x):
    return 1.0 - np.square(np.tanh(x))


def _ln(x):
    return np.log(np.abs(x) + EPS)


def _sqrt(x):
    return np.sqrt(np.abs(x))


def _arctanh(x):
    return np.arctanh(np.clip(x, -1.0 + ATANH_CLAMP, 1.0 - ATANH_CLAMP))


def _softplus(x):
    return np.logaddexp(0.0, x)


def l2_normalize(x):
    return x / (np.linalg.norm(x) + EPS)


# Pure elementwise unary kernels by op name. drop_* is excluded: it needs an
# RNG and is dispatched explicitly by the engine.
UNARY_KERNELS = {
    "x": lambda x: x,
    "neg": lambda x: -x,
    "ln": _ln,
    "sqrt": _sqrt,
    "exp": np.exp,
    "abs": np.abs,
    "sigmoid": sigmoid,
    "dsigmoid": sigmoid_grad,
    "softsign": softsign,
    "dsoftsign": softsign_grad,
    "softplus": _softplus,
    "erf": special.erf,
    "tanh": np.tanh,
    "arctanh": _arctanh,
    "bessel_i1e": special.i1e,
    "arcsinh": np.arcsinh,
    "max0": lambda x: np.maximum(x, 0.0),
    "min0": lambda x: np.minimum(x, 0.0),
    "norm": l2_normalize,
    "erfc": special.erfc,
    "arctan": np.arctan,
    "square": np.square,
    "dtanh": tanh_grad,
}

DROP_RATES = {"drop_05": 0.5, "drop_03": 0.3, "drop_01": 0.1}

# The 23 scalar unary ops available to the weight-update graph.
UPDATE_UNARY = (
    "x", "neg", "ln", "sqrt", "exp", "abs",
    "sigmoid", "dsigmoid", "softsign", "dsoftsign",
    "softplus", "erf", "tanh", "arctanh",
    "bessel_i1e", "arcsinh", "max0", "min0",
    "drop_05", "drop_03", "drop_01", "norm", "erfc",
)

# The reduced unary set for decay graphs: ops that map [0, 1] into [0, 1]-ish
# ranges, so inputs are never scaled above their original value.
DECAY_UNARY = (
    "x", "sigmoid", "dsigmoid", "erf", "erfc", "tanh",
    "arctan", "bessel_i1e", "square", "sqrt",
    "softsign", "dsoftsign", "dtanh",
)

BINARY_KERNELS = {
    "add": lambda a, b: a + b,
    "mul": lambda a, b: a * b,
    "sub": lambda a, b: a - b,
    "div": lambda a, b: a / (b + EPS),
    "hypot_div": lambda a, b: a / np.sqrt(1.0 + np.square(b)),
    "max": np.maximum,
    "min": np.minimum,
    "wavg": lambda a, b: 0.95 * a + 0.05 * b,
    "clip": lambda a, b: np.clip(a, -np.abs(b), np.abs(b)),
    # |x1|^x2 computed in log space so negative bases and zero are safe
    "pow": lambda a, b: np.exp(b * np.log(np.abs(a) + EPS)),
}

BINARY = ("add", "mul", "sub", "div", "hypot_div", "max", "min", "wavg", "clip", "pow")

# State-saving unary ops: (new_register <- f(x, register)); the op outputs the
# new register value.
STATE_KERNELS = {
    "ema_reg": lambda x, z: 0.95 * x + 0.05 * z,
    "diff_reg": lambda x, z: x - z,
    "max_reg": lambda x, z: np.maximum(x, z),
}

STATE_UNARY = ("ema_reg", "diff_reg", "max_reg")

UPDATE_OPS = UPDATE_UNARY + BINARY + STATE_UNARY
DECAY_OPS = DECAY_UNARY + BINARY

# Every op name the interpreter can evaluate, regardless of which space
# samples it. This is a superset of the sampling sets above.
KNOWN_OPS = frozenset(UNARY_KERNELS) | frozenset(DROP_RATES) | frozenset(BINARY_KERNELS) | frozenset(STATE_KERNELS)

# Weight-update graph operands.
OPERANDS = (
    "g", "g2", "g3",
    "v_hat", "s_hat", "l_hat",
    "sign_g", "sign_v",
    "one", "two",
    "wd_1e6", "wd_1e5", "wd_1e4", "wd_1e3",
    "mix_g_v", "mix_g2_s", "mix_g3_l",
    "avg_v", "avg_s", "avg_l",
)

# Decay graph operands (schedule tags); formulas live in schedules.py.
SCHEDULE_TAGS = ("ld", "li", "ldr", "lir", "cd", "ci", "cdr", "cir", "ccd", "cci", "ed", "ei", "dd", "di")


def arity(op: str) -> int:
    return 2 if op in BINARY_KERNELS else 1


def is_state_op(op: str) -> bool:
    return op in STATE_KERNELS


def is_drop_op(op: str) -> bool:
    return op in DROP_RATES
