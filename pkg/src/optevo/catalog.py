"""Discovered optimizers, Adam variants, and standard baselines as genomes.

Every entry pairs a graph encoding with an independent closed-form oracle so
the interpreter can be cross-validated. Oracles are straight-line numpy
transcriptions of the update formulas and never touch the graph machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import ops
from .graph import Genome, Graph, Node
from .schedules import Clock, eval_schedule


@dataclass
class CatalogEntry:
    name: str
    genome: Genome
    oracle: Callable  # (g, w, state, clock) -> U
    notes: str


def _node(nid, op, inputs, decays=None):
    n = Node(nid, op, list(inputs))
    n.decays = list(decays) if decays is not None else [None] * n.arity()
    return n


def _genome(name, momentum, *node_specs):
    """node_specs: (op, inputs, decays?) tuples; the last one is the output."""
    nodes = [_node(i, *spec) for i, spec in enumerate(node_specs)]
    return Genome(Graph(nodes[:-1], nodes[-1]), momentum, f"catalog:{name}")


def _dg_chain(ops_outer_last, leaf):
    """Decay graph applying unary ops to a schedule leaf, innermost first."""
    nodes = []
    ref = leaf
    for op in ops_outer_last:
        nodes.append(Node(len(nodes), op, [ref]))
        ref = len(nodes) - 1
    return Graph(nodes[:-1], nodes[-1])


def _dg_bin(op, a, b):
    return Graph([], Node(0, op, [a, b]))


# recurring decay terms
_T_ERFC2_CI = lambda: _dg_chain(["erfc", "erfc"], "ci")
_T_DTANH_CIR = lambda: _dg_chain(["dtanh"], "cir")
_T_DTANH_CI = lambda: _dg_chain(["dtanh"], "ci")
_T_ARCTAN_DD = lambda: _dg_chain(["arctan"], "dd")
_T_MAX_CCI_LIR = lambda: _dg_bin("max", "cci", "lir")
_T_ERFC_ED = lambda: _dg_chain(["erfc"], "ed")
_T_DD_LI = lambda: _dg_bin("mul", "dd", "li")
_T_LD = lambda: _dg_chain(["x"], "ld")


def _qhm(g, state):
    return 0.3 * g + 0.7 * state.v_hat


def _qhs(g, state):
    return 0.05 * g * g + 0.95 * state.s_hat


def _qhl(g, state):
    return 0.01 * g ** 3 + 0.99 * state.l_hat


def _clip(x1, x2):
    return np.clip(x1, -np.abs(x2), np.abs(x2))


def _div(a, b):
    return a / (b + ops.EPS)


def _sched(tag, clock):
    return eval_schedule(tag, clock)


# ---------------------------------------------------------------------------
# entry constructors: each returns (genome, oracle, notes)

def _sgd():
    return (_genome("SGD", "none", ("x", ["g"])),
            lambda g, w, state, clock: g, "plain gradient step")


def _momentum():
    return (_genome("Momentum", "momentum", ("x", ["g"])),
            lambda g, w, state, clock: g, "gradient step with heavy-ball momentum")


def _nesterov():
    return (_genome("Nesterov", "nesterov", ("x", ["g"])),
            lambda g, w, state, clock: g, "gradient step with Nesterov momentum")


def _qhm_entry():
    return (_genome("QHM", "none", ("x", ["mix_g_v"])),
            lambda g, w, state, clock: _qhm(g, state), "quasi-hyperbolic momentum")


def _adam():
    gen = _genome("Adam", "none",
                  ("sqrt", ["s_hat"]),
                  ("div", ["v_hat", 0]))

    def oracle(g, w, state, clock):
        return _div(state.v_hat, np.sqrt(np.abs(state.s_hat)))

    return gen, oracle, "Adam without bias correction, encoded in-space"


def _rmsprop():
    gen = _genome("RMSProp", "none",
                  ("sqrt", ["s_hat"]),
                  ("div", ["g", 0]))

    def oracle(g, w, state, clock):
        return _div(g, np.sqrt(np.abs(state.s_hat)))

    return gen, oracle, "RMSProp via the squared-gradient EMA"


def _powersign():
    gen = _genome("PowerSign-ld", "none",
                  ("mul", ["sign_g", "sign_v"], [_T_LD(), None]),
                  ("exp", [0]),
                  ("mul", [1, "g"]))

    def oracle(g, w, state, clock):
        ld = _sched("ld", clock)
        return np.exp(ld * np.sign(g) * np.sign(state.v_hat)) * g

    return gen, oracle, "sign-agreement exponential scaling with linear decay"


def _addsign():
    gen = _genome("AddSign-ld", "none",
                  ("mul", ["sign_g", "sign_v"], [_T_LD(), None]),
                  ("mul", [0, "g"]),
                  ("add", ["g", 1]))

    def oracle(g, w, state, clock):
        ld = _sched("ld", clock)
        return g + ld * np.sign(g) * np.sign(state.v_hat) * g

    return gen, oracle, "sign-agreement additive scaling with linear decay"


def _opt1():
    gen = _genome("Opt1", "none",
                  ("sub", ["wd_1e5", "mix_g2_s"]),
                  ("clip", ["wd_1e5", 0]),
                  ("softsign", [1]),
                  ("add", ["mix_g_v", 2]))

    def oracle(g, w, state, clock):
        wd = 1e-5 * w
        return _qhm(g, state) + ops.softsign(_clip(wd, wd - _qhs(g, state)))

    return gen, oracle, "QHM plus softsign-clipped weight decay"


def _opt2():
    gen = _genome("Opt2", "none",
                  ("sub", ["wd_1e5", "mix_g2_s"]),
                  ("hypot_div", ["wd_1e5", 0]),
                  ("softsign", [1]),
                  ("add", ["mix_g_v", 2]))

    def oracle(g, w, state, clock):
        wd = 1e-5 * w
        return _qhm(g, state) + ops.softsign(wd / np.sqrt(1.0 + np.square(wd - _qhs(g, state))))

    return gen, oracle, "QHM plus softsign-damped weight decay (squared-gradient EMA)"


def _opt3():
    gen = _genome("Opt3", "none",
                  ("sub", ["wd_1e5", "mix_g3_l"]),
                  ("hypot_div", ["wd_1e5", 0]),
                  ("softsign", [1]),
                  ("add", ["mix_g_v", 2]))

    def oracle(g, w, state, clock):
        wd = 1e-5 * w
        return _qhm(g, state) + ops.softsign(wd / np.sqrt(1.0 + np.square(wd - _qhl(g, state))))

    return gen, oracle, "QHM plus softsign-damped weight decay (cubed-gradient EMA)"


def _opt4():
    gen = _genome("Opt4", "none",
                  ("exp", ["v_hat"]),
                  ("clip", ["two", 0], [None, _T_ARCTAN_DD()]),
                  ("div", ["mix_g_v", 1], [_T_ERFC2_CI(), _T_DTANH_CIR()]))

    def oracle(g, w, state, clock):
        t1 = special.erfc(special.erfc(_sched("ci", clock)))
        t2 = ops.tanh_grad(_sched("cir", clock))
        t3 = math.atan(_sched("dd", clock))
        return _div(t1 * _qhm(g, state), t2 * _clip(2.0, t3 * np.exp(state.v_hat)))

    return gen, oracle, "decayed QHM over a clipped exponential of the gradient EMA"


def _opt4_1():
    gen = _genome("Opt4_1", "none",
                  ("exp", ["v_hat"]),
                  ("clip", ["two", 0], [None, _T_ARCTAN_DD()]),
                  ("div", ["mix_g_v", 1]))

    def oracle(g, w, state, clock):
        t3 = math.atan(_sched("dd", clock))
        return _div(_qhm(g, state), _clip(2.0, t3 * np.exp(state.v_hat)))

    return gen, oracle, "Opt4 with the outer decay terms removed"


def _opt4_2():
    gen = _genome("Opt4_2", "none",
                  ("exp", ["v_hat"]),
                  ("clip", ["two", 0]),
                  ("div", ["mix_g_v", 1]))

    def oracle(g, w, state, clock):
        return _div(_qhm(g, state), _clip(2.0, np.exp(state.v_hat)))

    return gen, oracle, "Opt4 with all decay terms removed"


def _opt5():
    gen = _genome("Opt5", "none",
                  ("exp", ["v_hat"]),
                  ("clip", ["two", 0]),
                  ("div", ["mix_g_v", 1], [_T_ERFC2_CI(), _T_DTANH_CIR()]))

    def oracle(g, w, state, clock):
        t1 = special.erfc(special.erfc(_sched("ci", clock)))
        t2 = ops.tanh_grad(_sched("cir", clock))
        return _div(t1 * _qhm(g, state), t2 * _clip(2.0, np.exp(state.v_hat)))

    return gen, oracle, "Opt4 without the inner clip decay"


def _opt6():
    gen = _genome("Opt6", "none",
                  ("exp", ["wd_1e4"]),
                  ("abs", [0], [_T_DTANH_CI()]),
                  ("div", ["mix_g_v", 1], [_T_ERFC2_CI(), _T_DTANH_CIR()]))

    def oracle(g, w, state, clock):
        t1 = special.erfc(special.erfc(_sched("ci", clock)))
        t2 = ops.tanh_grad(_sched("cir", clock))
        t3 = ops.tanh_grad(_sched("ci", clock))
        return _div(t1 * _qhm(g, state), t2 * np.abs(t3 * np.exp(1e-4 * w)))

    return gen, oracle, "decayed QHM over an exponential weight-decay term"


def _opt6_1():
    gen = _genome("Opt6_1", "none",
                  ("exp", ["wd_1e4"]),
                  ("abs", [0]),
                  ("div", ["mix_g_v", 1]))

    def oracle(g, w, state, clock):
        return _div(_qhm(g, state), np.abs(np.exp(1e-4 * w)))

    return gen, oracle, "Opt6 with all decay terms removed"


def _opt7():
    gen = _genome("Opt7", "none",
                  ("arcsinh", ["mix_g_v"]),
                  ("tanh", [0], [_T_MAX_CCI_LIR()]))

    def oracle(g, w, state, clock):
        t1 = max(_sched("cci", clock), _sched("lir", clock))
        return np.tanh(t1 * np.arcsinh(_qhm(g, state)))

    return gen, oracle, "double squashing of QHM, tanh outer"


def _opt7_1():
    gen = _genome("Opt7_1", "none",
                  ("arcsinh", ["mix_g_v"]),
                  ("tanh", [0]))

    def oracle(g, w, state, clock):
        return np.tanh(np.arcsinh(_qhm(g, state)))

    return gen, oracle, "Opt7 with the decay term removed"


def _opt8():
    gen = _genome("Opt8", "none",
                  ("arcsinh", ["mix_g_v"]),
                  ("arcsinh", [0], [_T_MAX_CCI_LIR()]))

    def oracle(g, w, state, clock):
        t1 = max(_sched("cci", clock), _sched("lir", clock))
        return np.arcsinh(t1 * np.arcsinh(_qhm(g, state)))

    return gen, oracle, "double squashing of QHM, arcsinh outer"


def _opt8_1():
    gen = _genome("Opt8_1", "none",
                  ("arcsinh", ["mix_g_v"]),
                  ("arcsinh", [0]))

    def oracle(g, w, state, clock):
        return np.arcsinh(np.arcsinh(_qhm(g, state)))

    return gen, oracle, "Opt8 with the decay term removed"


def _opt9():
    gen = _genome("Opt9", "nesterov",
                  ("arctan", ["mix_g2_s"]),
                  ("exp", [0]),
                  ("mul", ["g", 1], [_T_ERFC_ED(), None]))

    def oracle(g, w, state, clock):
        t1 = special.erfc(_sched("ed", clock))
        return t1 * g * np.exp(np.arctan(_qhs(g, state)))

    return gen, oracle, "decayed gradient scaled by an arctan curvature factor"


def _opt9_1():
    gen = _genome("Opt9_1", "nesterov",
                  ("arctan", ["mix_g2_s"]),
                  ("exp", [0]),
                  ("mul", ["g", 1]))

    def oracle(g, w, state, clock):
        return g * np.exp(np.arctan(_qhs(g, state)))

    return gen, oracle, "Opt9 with the decay term removed"


def _opt10():
    gen = _genome("Opt10", "nesterov",
                  ("bessel_i1e", ["g"], [_T_DD_LI()]),
                  ("bessel_i1e", [0]))

    def oracle(g, w, state, clock):
        t1 = _sched("dd", clock) * _sched("li", clock)
        return special.i1e(special.i1e(t1 * g))

    return gen, oracle, "double exponential-Bessel squashing of the decayed gradient"


def _opt10_1():
    gen = _genome("Opt10_1", "nesterov",
                  ("bessel_i1e", ["g"]),
                  ("bessel_i1e", [0]))

    def oracle(g, w, state, clock):
        return special.i1e(special.i1e(g))

    return gen, oracle, "Opt10 with the decay term removed"


def _a1():
    gen = _genome("A1", "none",
                  ("sqrt", ["s_hat"]),
                  ("clip", ["v_hat", 0]))

    def oracle(g, w, state, clock):
        return _clip(state.v_hat, np.sqrt(np.abs(state.s_hat)))

    return gen, oracle, "Adam variant: clip instead of divide"


def _a2():
    gen = _genome("A2", "none",
                  ("ln", ["s_hat"]),
                  ("abs", [0]),
                  ("clip", ["v_hat", 1]))

    def oracle(g, w, state, clock):
        return _clip(state.v_hat, np.abs(np.log(np.abs(state.s_hat) + ops.EPS)))

    return gen, oracle, "Adam variant: clip by |ln| of the squared-gradient EMA"


def _a3():
    gen = _genome("A3", "none",
                  ("ln", ["s_hat"]),
                  ("sqrt", [0]),
                  ("clip", ["v_hat", 1]))

    def oracle(g, w, state, clock):
        return _clip(state.v_hat, np.sqrt(np.abs(np.log(np.abs(state.s_hat) + ops.EPS))))

    return gen, oracle, "Adam variant: clip by sqrt |ln| of the squared-gradient EMA"


def _a4():
    gen = _genome("A4", "none",
                  ("sigmoid", ["s_hat"]),
                  ("clip", ["v_hat", 0]))

    def oracle(g, w, state, clock):
        return _clip(state.v_hat, ops.sigmoid(state.s_hat))

    return gen, oracle, "Adam variant: clip by sigmoid of the squared-gradient EMA"


def _a5():
    gen = _genome("A5", "none",
                  ("sqrt", ["s_hat"]),
                  ("clip", ["v_hat", 0]),
                  ("norm", [1]))

    def oracle(g, w, state, clock):
        return ops.l2_normalize(_clip(state.v_hat, np.sqrt(np.abs(state.s_hat))))

    return gen, oracle, "A1 followed by L2 normalization"


_BUILDERS = {
    "SGD": _sgd, "Momentum": _momentum, "Nesterov": _nesterov, "QHM": _qhm_entry,
    "Adam": _adam, "RMSProp": _rmsprop,
    "PowerSign-ld": _powersign, "AddSign-ld": _addsign,
    "Opt1": _opt1, "Opt2": _opt2, "Opt3": _opt3,
    "Opt4": _opt4, "Opt4_1": _opt4_1, "Opt4_2": _opt4_2,
    "Opt5": _opt5, "Opt6": _opt6, "Opt6_1": _opt6_1,
    "Opt7": _opt7, "Opt7_1": _opt7_1, "Opt8": _opt8, "Opt8_1": _opt8_1,
    "Opt9": _opt9, "Opt9_1": _opt9_1, "Opt10": _opt10, "Opt10_1": _opt10_1,
    "A1": _a1, "A2": _a2, "A3": _a3, "A4": _a4, "A5": _a5,
}

DISCOVERED = tuple(f"Opt{i}" for i in range(1, 11))
ADAM_VARIANTS = tuple(f"A{i}" for i in range(1, 6))
BASELINES = ("SGD", "Momentum", "Nesterov", "QHM", "Adam", "RMSProp",
             "PowerSign-ld", "AddSign-ld")
ABLATIONS = ("Opt4_1", "Opt4_2", "Opt6_1", "Opt7_1", "Opt8_1", "Opt9_1", "Opt10_1")


def names() -> list:
    return list(_BUILDERS)


def build(name: str) -> CatalogEntry:
    if name not in _BUILDERS:
        raise KeyError(f"unknown catalog entry {name!r}")
    genome, oracle, notes = _BUILDERS[name]()
    return CatalogEntry(name, genome, oracle, notes)


def oracle_update(name: str, g, w, state, clock: Clock):
    return build(name).oracle(g, w, state, clock)
