"""Dual-graph genome: update graph + per-edge decay graphs + momentum type.

Genomes are treated as immutable values after construction: mutation always
deep-copies. All randomness flows through explicitly passed numpy Generators.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from . import ops

MOMENTUM_TYPES = ("none", "momentum", "nesterov")

MUTATION_TAGS = ("op", "connection", "arity", "swap", "momentum", "decay")


class GenomeError(ValueError):
    """Structurally invalid genome."""


class GenomeParseError(GenomeError):
    """Malformed genome text; message carries position and cause."""


@dataclass
class Node:
    id: int
    op: str
    inputs: list
    # one slot per input; None = undecayed edge. Always None inside decay graphs.
    decays: list | None = None

    def arity(self) -> int:
        return ops.arity(self.op)


@dataclass
class Graph:
    hidden: list
    output: Node

    def nodes(self):
        return [*self.hidden, self.output]

    def active_ids(self) -> set:
        """Ids of nodes from which the output is reachable (output included)."""
        by_id = {n.id: n for n in self.hidden}
        active = {self.output.id}
        stack = [ref for ref in self.output.inputs if isinstance(ref, int)]
        while stack:
            nid = stack.pop()
            if nid in active:
                continue
            active.add(nid)
            stack.extend(ref for ref in by_id[nid].inputs if isinstance(ref, int))
        return active


# A decay graph is structurally a Graph whose leaves are schedule tags and
# whose nodes carry no nested decays.
DecayGraph = Graph


@dataclass
class Genome:
    graph: Graph
    momentum: str
    uid: str
    lineage: dict | None = None


@dataclass
class InitConfig:
    n_hidden: int = 4
    p_decay: float = 0.2
    decay_grid: int = 100       # grid resolution for the decay range check
    resample_cap: int = 200     # max decay re-samples before giving up


def resolve_active(graph: Graph) -> set:
    return graph.active_ids()


def _check_node(node: Node, operand_pool, max_ref: int, allow_decay: bool, op_space):
    if node.op not in ops.KNOWN_OPS:
        raise GenomeError(f"node {node.id}: unknown op {node.op!r}")
    if node.op not in op_space:
        raise GenomeError(f"node {node.id}: op {node.op!r} not in this graph space")
    if len(node.inputs) != node.arity():
        raise GenomeError(f"node {node.id}: op {node.op!r} expects {node.arity()} inputs")
    for ref in node.inputs:
        if isinstance(ref, str):
            if ref not in operand_pool:
                raise GenomeError(f"node {node.id}: unknown operand {ref!r}")
        elif isinstance(ref, int):
            if not 0 <= ref < max_ref:
                raise GenomeError(f"node {node.id}: reference to node {ref} is out of range")
        else:
            raise GenomeError(f"node {node.id}: bad input reference {ref!r}")
    if node.decays is not None:
        if not allow_decay:
            raise GenomeError(f"node {node.id}: decay graphs are not allowed here")
        if len(node.decays) != node.arity():
            raise GenomeError(f"node {node.id}: decay slots must match arity")
        for dg in node.decays:
            if dg is not None:
                validate_decay_graph(dg)


def validate_decay_graph(dg: DecayGraph) -> None:
    # decay graphs never contain state ops or nested decays
    op_space = set(ops.DECAY_OPS)
    for i, node in enumerate(dg.hidden):
        if node.id != i:
            raise GenomeError(f"decay node ids must be 0..n-1 in order, got {node.id}")
        _check_node(node, ops.SCHEDULE_TAGS, i, False, op_space)
    out = dg.output
    if out.id != len(dg.hidden):
        raise GenomeError("decay output node id must equal hidden count")
    _check_node(out, ops.SCHEDULE_TAGS, len(dg.hidden), False, op_space)


def validate_genome(genome: Genome) -> None:
    if genome.momentum not in MOMENTUM_TYPES:
        raise GenomeError(f"unknown momentum type {genome.momentum!r}")
    # arctan is reachable only via decay-graph mutation history, but remains
    # evaluable; the update space samples UPDATE_OPS plus that escape hatch.
    op_space = set(ops.UPDATE_OPS) | {"arctan"}
    g = genome.graph
    for i, node in enumerate(g.hidden):
        if node.id != i:
            raise GenomeError(f"hidden node ids must be 0..n-1 in order, got {node.id}")
        _check_node(node, ops.OPERANDS, i, True, op_space)
    if g.output.id != len(g.hidden):
        raise GenomeError("output node id must equal hidden count")
    _check_node(g.output, ops.OPERANDS, len(g.hidden), True, op_space)


def _new_uid(rng) -> str:
    return f"{int(rng.integers(0, 2 ** 62)):016x}"


def _pick(rng, pool):
    return pool[int(rng.integers(len(pool)))]


def _random_decay_structure(rng) -> DecayGraph:
    hidden = []
    for i in range(1):
        op = _pick(rng, ops.DECAY_OPS)
        pool = list(ops.SCHEDULE_TAGS) + list(range(i))
        inputs = [_pick(rng, pool) for _ in range(ops.arity(op))]
        hidden.append(Node(i, op, inputs))
    op = _pick(rng, ops.DECAY_OPS)
    pool = list(ops.SCHEDULE_TAGS) + list(range(len(hidden)))
    out = Node(len(hidden), op, [_pick(rng, pool) for _ in range(ops.arity(op))])
    return Graph(hidden, out)


def random_decay_graph(rng, cfg: InitConfig) -> DecayGraph:
    """Sample decay graphs until one stays inside [0, 1] over the whole horizon."""
    from .integrity import decay_range_check

    for _ in range(cfg.resample_cap):
        dg = _random_decay_structure(rng)
        if decay_range_check(dg, cfg.decay_grid):
            return dg
    raise GenomeError(f"no range-valid decay graph found in {cfg.resample_cap} samples")


def _maybe_decays(rng, n_slots: int, cfg: InitConfig) -> list:
    return [random_decay_graph(rng, cfg) if rng.random() < cfg.p_decay else None
            for _ in range(n_slots)]


def random_init(rng, cfg: InitConfig | None = None) -> Genome:
    """Random genome: 4 hidden + 1 output node, uniform ops and connections."""
    cfg = cfg or InitConfig()
    hidden = []
    for i in range(cfg.n_hidden):
        op = _pick(rng, ops.UPDATE_OPS)
        pool = list(ops.OPERANDS) + list(range(i))
        inputs = [_pick(rng, pool) for _ in range(ops.arity(op))]
        hidden.append(Node(i, op, inputs, _maybe_decays(rng, ops.arity(op), cfg)))
    op = _pick(rng, ops.UPDATE_OPS)
    pool = list(ops.OPERANDS) + list(range(cfg.n_hidden))
    output = Node(cfg.n_hidden, op, [_pick(rng, pool) for _ in range(ops.arity(op))],
                  _maybe_decays(rng, ops.arity(op), cfg))
    momentum = _pick(rng, MOMENTUM_TYPES)
    return Genome(Graph(hidden, output), momentum, _new_uid(rng))


def _node_by_id(graph: Graph, nid: int) -> Node:
    return graph.output if nid == len(graph.hidden) else graph.hidden[nid]


def _connection_pool(graph: Graph, nid: int, operands) -> list:
    n_ref = len(graph.hidden) if nid == len(graph.hidden) else nid
    return list(operands) + list(range(n_ref))


def _unary_pool(decay_space: bool):
    return ops.DECAY_UNARY if decay_space else ops.UPDATE_UNARY + ops.STATE_UNARY


def _mutate_structural(graph: Graph, rng, kind: int, node: Node, decay_space: bool):
    """Apply structural mutation 1-4 in place on a (copied) graph node."""
    operands = ops.SCHEDULE_TAGS if decay_space else ops.OPERANDS
    if kind == 1:  # resample op within the same arity class
        pool = ops.BINARY if node.arity() == 2 else _unary_pool(decay_space)
        node.op = _pick(rng, [o for o in pool if o != node.op])
    elif kind == 2:  # rewire one argument connection
        slot = int(rng.integers(node.arity()))
        pool = [c for c in _connection_pool(graph, node.id, operands)
                if c != node.inputs[slot]]
        node.inputs[slot] = _pick(rng, pool)
    elif kind == 3:  # arity flip
        if node.arity() == 1:
            node.op = _pick(rng, ops.BINARY)
            extra = _pick(rng, _connection_pool(graph, node.id, operands))
            node.inputs.append(extra)
            if node.decays is not None:
                node.decays.append(None)
        else:
            node.op = _pick(rng, _unary_pool(decay_space))
            drop = int(rng.integers(2))
            del node.inputs[drop]
            if node.decays is not None:
                del node.decays[drop]
    elif kind == 4:  # swap binary connections
        node.inputs.reverse()
        if node.decays is not None:
            node.decays.reverse()
    else:
        raise ValueError(f"bad structural mutation kind {kind}")


def _structural_kinds(node: Node) -> list:
    return [1, 2, 3, 4] if node.arity() == 2 else [1, 2, 3]


def _mutate_decay_inner(dg: DecayGraph, rng, cfg: InitConfig) -> DecayGraph:
    """One structural sub-mutation on a decay graph, re-drawn until range-valid."""
    from .integrity import decay_range_check

    for _ in range(cfg.resample_cap):
        cand = copy.deepcopy(dg)
        active = sorted(cand.active_ids())
        node = _node_by_id(cand, int(_pick(rng, active)))
        kind = int(_pick(rng, _structural_kinds(node)))
        _mutate_structural(cand, rng, kind, node, decay_space=True)
        if decay_range_check(cand, cfg.decay_grid):
            return cand
    # pathological graph: no valid single-step edit found, fall back to a fresh one
    return random_decay_graph(rng, cfg)


def mutate(genome: Genome, rng, cfg: InitConfig | None = None, mask: str = "full") -> Genome:
    """Return a child differing from `genome` by exactly one mutation.

    The six mutation classes are: op resample, connection rewire, arity flip,
    binary-argument swap, momentum resample, and decay edit. The target node is
    drawn uniformly from the active set; the class is drawn uniformly from the
    subset applicable to that node. `mask="decay_only"` restricts the draw to
    decay edits.
    """
    cfg = cfg or InitConfig()
    child = copy.deepcopy(genome)
    graph = child.graph
    active = sorted(graph.active_ids())
    node = _node_by_id(graph, int(_pick(rng, active)))

    if mask == "decay_only":
        kinds = [6]
    elif mask == "full":
        kinds = _structural_kinds(node) + [5, 6]
    else:
        raise ValueError(f"unknown mutation mask {mask!r}")
    kind = int(_pick(rng, kinds))

    if kind <= 4:
        _mutate_structural(graph, rng, kind, node, decay_space=False)
        tag = MUTATION_TAGS[kind - 1]
    elif kind == 5:
        child.momentum = _pick(rng, [m for m in MOMENTUM_TYPES if m != genome.momentum])
        tag = "momentum"
    else:
        slot = int(rng.integers(node.arity()))
        if node.decays is None:
            node.decays = [None] * node.arity()
        if node.decays[slot] is None:
            node.decays[slot] = random_decay_graph(rng, cfg)
        elif rng.random() < 0.5:
            node.decays[slot] = None
        else:
            node.decays[slot] = _mutate_decay_inner(node.decays[slot], rng, cfg)
        tag = "decay"

    child.uid = _new_uid(rng)
    child.lineage = {"parent": genome.uid, "mutation": tag}
    return child


# ---------------------------------------------------------------------------
# canonical serialization

def _node_to_dict(node: Node, with_decays: bool) -> dict:
    d = {"id": node.id, "op": node.op, "inputs": list(node.inputs)}
    if with_decays:
        d["decays"] = [None if dg is None else _graph_to_dict(dg, False)
                       for dg in (node.decays or [None] * node.arity())]
    return d


def _graph_to_dict(graph: Graph, with_decays: bool) -> dict:
    return {"nodes": [_node_to_dict(n, with_decays) for n in graph.hidden],
            "output": _node_to_dict(graph.output, with_decays)}


def genome_to_dict(genome: Genome) -> dict:
    d = _graph_to_dict(genome.graph, True)
    return {"uid": genome.uid, "momentum": genome.momentum,
            "lineage": genome.lineage, **d}


def _node_from_dict(d: dict, with_decays: bool) -> Node:
    try:
        node = Node(int(d["id"]), str(d["op"]), list(d["inputs"]))
    except (KeyError, TypeError) as e:
        raise GenomeParseError(f"malformed node object: {e}") from e
    node.inputs = [ref if isinstance(ref, str) else int(ref) for ref in node.inputs]
    if with_decays:
        raw = d.get("decays")
        if raw is None:
            node.decays = [None] * len(node.inputs)
        else:
            node.decays = [None if dg is None else _graph_from_dict(dg, False) for dg in raw]
    return node


def _graph_from_dict(d: dict, with_decays: bool) -> Graph:
    try:
        hidden = [_node_from_dict(nd, with_decays) for nd in d["nodes"]]
        output = _node_from_dict(d["output"], with_decays)
    except KeyError as e:
        raise GenomeParseError(f"missing graph field {e}") from e
    return Graph(hidden, output)


def genome_from_dict(d: dict) -> Genome:
    graph = _graph_from_dict(d, True)
    try:
        genome = Genome(graph, str(d["momentum"]), str(d["uid"]), d.get("lineage"))
    except KeyError as e:
        raise GenomeParseError(f"missing genome field {e}") from e
    validate_genome(genome)
    return genome


def serialize(genome: Genome) -> str:
    """Canonical single-line JSON text; round-trips bit-exactly."""
    return json.dumps(genome_to_dict(genome), sort_keys=True, separators=(",", ":"))


def deserialize(text: str) -> Genome:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise GenomeParseError(f"invalid JSON at position {e.pos}: {e.msg}") from e
    if not isinstance(d, dict):
        raise GenomeParseError("genome text must be a JSON object")
    return genome_from_dict(d)


# ---------------------------------------------------------------------------
# human-readable rendering

_OPERAND_RENDER = {
    "g": "g", "g2": "g^2", "g3": "g^3",
    "v_hat": "v_hat", "s_hat": "s_hat", "l_hat": "l_hat",
    "sign_g": "sign(g)", "sign_v": "sign(v_hat)",
    "one": "1", "two": "2",
    "wd_1e6": "1e-6*w", "wd_1e5": "1e-5*w", "wd_1e4": "1e-4*w", "wd_1e3": "1e-3*w",
    "mix_g_v": "0.3g+0.7v_hat", "mix_g2_s": "0.05g^2+0.95s_hat",
    "mix_g3_l": "0.01g^3+0.99l_hat",
    "avg_v": "avg3(beta*v)-g", "avg_s": "avg3(beta*s)-g^2",
    "avg_l": "avg3(beta*lambda)-g^3",
}

_UNARY_RENDER = {
    "x": "{0}", "neg": "-({0})", "ln": "ln(|{0}|+eps)", "sqrt": "sqrt(|{0}|)",
    "exp": "e^({0})", "abs": "|{0}|", "max0": "max({0}, 0)", "min0": "min({0}, 0)",
    "drop_05": "drop({0}, 0.5)", "drop_03": "drop({0}, 0.3)", "drop_01": "drop({0}, 0.1)",
    "ema_reg": "ema095({0})", "diff_reg": "diffreg({0})", "max_reg": "runmax({0})",
}

_BINARY_RENDER = {
    "add": "({0} + {1})", "mul": "({0} * {1})", "sub": "({0} - {1})",
    "div": "({0} / ({1} + eps))", "hypot_div": "({0} / sqrt(1 + ({1})^2))",
    "max": "max({0}, {1})", "min": "min({0}, {1})",
    "wavg": "(0.95*{0} + 0.05*{1})", "clip": "clip({0}, +/-|{1}|)",
    "pow": "|{0}|^({1})",
}


def _render_graph(graph: Graph, leaf_render, decay_hook=None) -> str:
    cache = {}

    def render(node: Node) -> str:
        args = []
        for slot, ref in enumerate(node.inputs):
            s = leaf_render[ref] if isinstance(ref, str) else cache[ref]
            if decay_hook is not None and node.decays and node.decays[slot] is not None:
                s = f"{decay_hook(node.decays[slot])}*{s}"
            args.append(s)
        if node.arity() == 2:
            fmt = _BINARY_RENDER[node.op]
        else:
            fmt = _UNARY_RENDER.get(node.op, node.op + "({0})")
        return fmt.format(*args)

    active = graph.active_ids()
    for node in graph.hidden:
        if node.id in active:
            cache[node.id] = render(node)
    return render(graph.output)


def pretty_print(genome: Genome) -> str:
    """Infix rendering of the active subgraph, with a legend for decay terms."""
    legend = []

    def decay_hook(dg: DecayGraph) -> str:
        name = f"t{len(legend) + 1}"
        expr = _render_graph(dg, {tag: tag for tag in ops.SCHEDULE_TAGS})
        legend.append(f"{name} = {expr}")
        return name

    expr = _render_graph(genome.graph, _OPERAND_RENDER, decay_hook)
    lines = [f"U = {expr}", f"momentum = {genome.momentum}", *legend]
    return "\n".join(lines)
