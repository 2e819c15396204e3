import numpy as np
import pytest

from optevo import engine, ops
from optevo.graph import Genome, Graph, Node
from optevo.schedules import Clock, eval_schedule


def _genome(momentum, *node_specs):
    nodes = [Node(i, op, list(inputs)) for i, (op, inputs) in enumerate(node_specs)]
    return Genome(Graph(nodes[:-1], nodes[-1]), momentum, "test")


IDENTITY = _genome("none", ("x", ["g"]))


def test_init_state_zeros_and_registers():
    g = _genome("none", ("ema_reg", ["g"]), ("max_reg", [0]), ("x", [1]))
    state = engine.init_state(g, (3,))
    np.testing.assert_array_equal(state.v_hat, np.zeros(3))
    assert set(state.node_regs) == {0, 1}
    assert state.momentum_slot.shape == (3,)  # allocated even for momentum="none"
    assert state.step == 0


def test_update_emas_single_and_double_step():
    state = engine.init_state(IDENTITY, (1,))
    engine.update_emas(state, np.array([1.0]))
    assert state.v_hat[0] == pytest.approx(0.1, abs=1e-15)
    engine.update_emas(state, np.array([1.0]))
    assert state.v_hat[0] == pytest.approx(0.19, abs=1e-15)


def test_update_emas_beta_zero_bank_is_identity():
    state = engine.init_state(IDENTITY, (1,))
    engine.update_emas(state, np.array([2.0]))
    assert state.v_bank[0][0] == 2.0      # beta=0 entry equals the raw term
    assert state.s_bank[0][0] == 4.0
    assert state.l_bank[0][0] == 8.0


# ---------------------------------------------------------------------------
# eval_op conventions

def test_eval_op_clip():
    v, _ = engine.eval_op("clip", np.array([5.0]), np.array([-2.0]))
    assert v[0] == 2.0


def test_eval_op_softsign():
    v, _ = engine.eval_op("softsign", np.array([1.0]))
    assert v[0] == 0.5


def test_eval_op_min0():
    v, _ = engine.eval_op("min0", np.array([-2.0]))
    assert v[0] == -2.0


def test_eval_op_max_reg_trace():
    reg = np.zeros(1)
    v1, reg = engine.eval_op("max_reg", np.array([3.0]), reg=reg)
    v2, reg = engine.eval_op("max_reg", np.array([1.0]), reg=reg)
    assert v1[0] == 3.0 and v2[0] == 3.0


def test_eval_op_pow_is_total():
    v, _ = engine.eval_op("pow", np.array([-2.0]), np.array([2.0]))
    assert v[0] == pytest.approx(4.0, rel=1e-7)
    v, _ = engine.eval_op("pow", np.array([0.0]), np.array([0.5]))
    assert np.isfinite(v[0])


def test_eval_op_arctanh_clamped():
    v, _ = engine.eval_op("arctanh", np.array([1.5]))
    assert np.isfinite(v[0])


def test_eval_op_drop_preserves_expectation():
    rng = np.random.default_rng(0)
    x = np.ones(100_000)
    v, _ = engine.eval_op("drop_05", x, rng=rng)
    assert v.mean() == pytest.approx(1.0, abs=0.02)
    assert set(np.unique(v)) == {0.0, 2.0}   # inverted dropout rescales survivors


# ---------------------------------------------------------------------------
# compute_update

def test_identity_update():
    g = np.array([1.0, -2.0])
    state = engine.init_state(IDENTITY, g.shape)
    engine.update_emas(state, g)
    u, report = engine.compute_update(IDENTITY, state, g, np.zeros(2), Clock(0, 10))
    np.testing.assert_array_equal(u, g)
    assert not report.nonfinite_flag
    assert report.update_norm == pytest.approx(np.sqrt(5.0))


def test_edge_decay_scales_input():
    dg = Graph([], Node(0, "x", ["ld"]))
    node = Node(0, "x", ["g"], [dg])
    genome = Genome(Graph([], node), "none", "decayed")
    g = np.array([2.0, -4.0])
    for t in (0, 250, 1000):
        state = engine.init_state(genome, g.shape)
        engine.update_emas(state, g)
        clock = Clock(t, 1000)
        u, report = engine.compute_update(genome, state, g, np.zeros(2), clock)
        np.testing.assert_allclose(u, g * eval_schedule("ld", clock), atol=1e-15)
        assert report.decay_values[(0, 0)] == eval_schedule("ld", clock)
    assert u[0] == 0.0  # ld at t=T zeroes the contribution entirely


def test_decay_factors_out_of_multiplicative_graph():
    dg = Graph([], Node(0, "x", ["cd"]))
    decayed = Genome(Graph([Node(0, "mul", ["g", "one"], [dg, None])],
                           Node(1, "x", [0])), "none", "d")
    plain = Genome(Graph([Node(0, "mul", ["g", "one"])], Node(1, "x", [0])), "none", "p")
    g = np.array([0.7, -1.3, 2.1])
    clock = Clock(300, 1000)
    sd = engine.init_state(decayed, g.shape)
    sp = engine.init_state(plain, g.shape)
    engine.update_emas(sd, g)
    engine.update_emas(sp, g)
    ud, _ = engine.compute_update(decayed, sd, g, np.zeros(3), clock)
    up, _ = engine.compute_update(plain, sp, g, np.zeros(3), clock)
    np.testing.assert_allclose(ud, up * eval_schedule("cd", clock), rtol=1e-12)


def test_state_register_advances_once_despite_fanout():
    genome = _genome("none", ("ema_reg", ["g"]), ("add", [0, 0]))
    state = engine.init_state(genome, (1,))
    g = np.array([1.0])
    engine.update_emas(state, g)
    u, _ = engine.compute_update(genome, state, g, np.zeros(1), Clock(0, 10))
    assert state.node_regs[0][0] == pytest.approx(0.95)   # 0.95*1 + 0.05*0, once
    assert u[0] == pytest.approx(1.9)


def test_drop_node_deterministic_per_seed_and_step():
    genome = _genome("none", ("drop_05", ["g"]))
    g = np.arange(1.0, 33.0)

    def run(seed):
        state = engine.init_state(genome, g.shape, rng_seed=seed)
        outs = []
        for _ in range(3):
            _, u, _ = engine.step_with_report(genome, state, np.zeros_like(g), g, 0.1, Clock(0, 10))
            outs.append(u.copy())
        return outs

    a, b, c = run(1), run(1), run(2)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))
    assert not np.array_equal(a[0], a[1])   # mask varies across steps


def test_nonfinite_update_reported_not_raised():
    genome = _genome("none", ("exp", ["g"]), ("exp", [0]), ("exp", [1]))
    g = np.array([50.0])
    state = engine.init_state(genome, g.shape)
    engine.update_emas(state, g)
    u, report = engine.compute_update(genome, state, g, np.zeros(1), Clock(0, 10))
    assert report.nonfinite_flag
    assert report.update_norm == np.inf


def test_scalar_update_broadcasts_to_gradient_shape():
    genome = _genome("none", ("norm", ["g"]))
    g = np.array([3.0, 4.0])
    state = engine.init_state(genome, g.shape)
    engine.update_emas(state, g)
    u, _ = engine.compute_update(genome, state, g, np.zeros(2), Clock(0, 10))
    np.testing.assert_allclose(u, [0.6, 0.8], rtol=1e-7)


# ---------------------------------------------------------------------------
# apply_step: the three momentum forms at beta_i = 0.95 (t=0)

def test_momentum_coefficient_cycle():
    assert engine.momentum_coefficient(Clock(0, 100)) == pytest.approx(0.95)
    assert engine.momentum_coefficient(Clock(50, 100)) == pytest.approx(0.85)
    assert engine.momentum_coefficient(Clock(100, 100)) == pytest.approx(0.95)


def test_apply_step_none():
    state = engine.init_state(IDENTITY, (1,))
    w = engine.apply_step(IDENTITY, state, np.array([1.0]), np.array([2.0]), 0.1, Clock(0, 100))
    assert w[0] == pytest.approx(0.8)
    assert state.step == 1


def test_apply_step_momentum():
    genome = _genome("momentum", ("x", ["g"]))
    state = engine.init_state(genome, (1,))
    w = engine.apply_step(genome, state, np.array([1.0]), np.array([1.0]), 0.1, Clock(0, 100))
    assert state.momentum_slot[0] == pytest.approx(-0.1)
    assert w[0] == pytest.approx(0.9)


def test_apply_step_nesterov():
    genome = _genome("nesterov", ("x", ["g"]))
    state = engine.init_state(genome, (1,))
    w = engine.apply_step(genome, state, np.array([1.0]), np.array([1.0]), 0.1, Clock(0, 100))
    assert w[0] == pytest.approx(1.0 - 0.195)


def test_operand_values():
    g = np.array([2.0])
    w = np.array([10.0])
    state = engine.init_state(IDENTITY, (1,))
    engine.update_emas(state, g)
    assert engine.operand_value("g2", g, w, state)[0] == 4.0
    assert engine.operand_value("g3", g, w, state)[0] == 8.0
    assert engine.operand_value("sign_g", g, w, state)[0] == 1.0
    assert engine.operand_value("two", g, w, state)[0] == 2.0
    assert engine.operand_value("wd_1e3", g, w, state)[0] == pytest.approx(0.01)
    qhm = engine.operand_value("mix_g_v", g, w, state)[0]
    assert qhm == pytest.approx(0.3 * 2.0 + 0.7 * state.v_hat[0])
    with pytest.raises(ValueError):
        engine.operand_value("nope", g, w, state)
