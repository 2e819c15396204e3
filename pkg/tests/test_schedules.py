import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optevo import ops
from optevo.graph import Graph, Node
from optevo.schedules import (Clock, LR_NAMES, catalog_lr, eval_decay_graph,
                              eval_schedule, one_cycle, schedule_table)

T = 1000


def test_clock_validates_bounds():
    with pytest.raises(ValueError):
        Clock(-1, T)
    with pytest.raises(ValueError):
        Clock(T + 1, T)
    with pytest.raises(ValueError):
        Clock(0, 0)


@pytest.mark.parametrize("tag,t,expected", [
    ("ld", 0, 1.0),
    ("li", 0, 0.0),
    ("cd", T / 2, 0.5),
    ("ci", T, 1.0),
    ("dd", 0, 0.95),
    ("di", 0, 0.0),
    ("ed", 0, 1.0),
    ("ed", T, 0.01),
    ("ei", T, 0.99),
    ("lir", 0, 0.0),
    ("lir", T, 0.0),   # mod(2t, T) wraps to 0 at the boundary
])
def test_spot_values(tag, t, expected):
    assert eval_schedule(tag, Clock(t, T)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("tag", ops.SCHEDULE_TAGS)
def test_range_on_grid(tag):
    vals = [eval_schedule(tag, Clock(t, T)) for t in range(T + 1)]
    assert min(vals) >= 0.0 and max(vals) <= 1.0


@pytest.mark.parametrize("a,b", [("li", "ld"), ("ci", "cd"), ("cir", "cdr"),
                                 ("cci", "ccd")])
def test_complements_sum_to_one(a, b):
    for t in range(0, T + 1, 7):
        clock = Clock(t, T)
        assert eval_schedule(a, clock) + eval_schedule(b, clock) == pytest.approx(1.0, abs=1e-12)


def test_ei_ed_and_dd_di_complements():
    for t in range(0, T + 1, 7):
        clock = Clock(t, T)
        assert eval_schedule("ei", clock) + eval_schedule("ed", clock) == pytest.approx(1.0, abs=1e-12)
        assert eval_schedule("dd", clock) + eval_schedule("di", clock) == pytest.approx(0.95, abs=1e-12)


@pytest.mark.parametrize("tag", ["ldr", "lir", "cdr", "cir"])
def test_restart_periodicity(tag):
    for t in range(0, T // 2, 3):
        assert eval_schedule(tag, Clock(t, T)) == pytest.approx(
            eval_schedule(tag, Clock(t + T // 2, T)), abs=1e-12)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=200, deadline=None)
def test_all_schedules_stay_in_unit_interval(t):
    clock = Clock(t, 10 ** 6)
    for tag in ops.SCHEDULE_TAGS:
        v = eval_schedule(tag, clock)
        assert 0.0 <= v <= 1.0


def test_unknown_tag_raises():
    with pytest.raises(ValueError):
        eval_schedule("nope", Clock(0, T))


# ---------------------------------------------------------------------------
# decay graphs

def test_decay_graph_erfc_erfc_ci():
    dg = Graph([Node(0, "erfc", ["ci"])], Node(1, "erfc", [0]))
    v = eval_decay_graph(dg, Clock(0, T))
    assert v == pytest.approx(math.erfc(1.0), abs=1e-12)
    assert v == pytest.approx(0.157299, abs=1e-6)


def test_decay_graph_identity_over_ld_at_horizon():
    dg = Graph([], Node(0, "x", ["ld"]))
    assert eval_decay_graph(dg, Clock(T, T)) == 0.0


def test_decay_graph_max_cci_lir_at_zero():
    dg = Graph([], Node(0, "max", ["cci", "lir"]))
    assert eval_decay_graph(dg, Clock(0, T)) == 0.0


def test_decay_graph_skips_inactive_nodes():
    dg = Graph([Node(0, "erfc", ["ci"]), Node(1, "square", ["dd"])],
               Node(2, "x", [1]))
    assert eval_decay_graph(dg, Clock(0, T)) == pytest.approx(0.95 ** 2, abs=1e-12)


# ---------------------------------------------------------------------------
# one-cycle and LR curves

def test_one_cycle_endpoints_and_hold():
    warm, hold = 0.1, 0.2
    assert one_cycle(Clock(0, T), warm, hold) == 0.0
    assert one_cycle(Clock(100, T), warm, hold) == 1.0       # end of warmup
    assert one_cycle(Clock(250, T), warm, hold) == 1.0       # mid-hold
    assert one_cycle(Clock(T, T), warm, hold) == pytest.approx(0.0, abs=1e-12)


def test_one_cycle_continuous_at_phase_boundaries():
    warm, hold = 0.1, 0.2
    for boundary in (warm * T, (warm + hold) * T):
        left = one_cycle(Clock(boundary - 1e-6, T), warm, hold)
        right = one_cycle(Clock(boundary + 1e-6, T), warm, hold)
        assert abs(left - right) < 1e-6


def test_one_cycle_rejects_bad_fractions():
    with pytest.raises(ValueError):
        one_cycle(Clock(0, T), 0.7, 0.7)


@pytest.mark.parametrize("name", LR_NAMES)
def test_catalog_lr_zero_at_both_ends(name):
    assert catalog_lr(name, Clock(0, T)) == 0.0
    assert catalog_lr(name, Clock(T, T)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", LR_NAMES)
def test_catalog_lr_finite_and_positive_mid_run(name):
    v = catalog_lr(name, Clock(T // 2, T))
    assert np.isfinite(v) and v > 0.0


def test_lr9_tracks_opt7_decay_term():
    dg = Graph([], Node(0, "max", ["cci", "lir"]))
    for t in (150, 333, 500, 777):
        clock = Clock(t, T)
        shape = catalog_lr("LR9", clock) / one_cycle(clock)
        assert shape == pytest.approx(math.tanh(eval_decay_graph(dg, clock)), abs=1e-12)


def test_schedule_table_shape():
    header, rows = schedule_table(100)
    assert header == ["t", *ops.SCHEDULE_TAGS]
    assert rows.shape == (101, 15)
    assert rows[0, 0] == 0 and rows[-1, 0] == 100
