import numpy as np
import pytest

from optevo import catalog
from optevo.graph import Graph, Node
from optevo.integrity import SphereConfig, decay_range_check, sphere_check


def test_sgd_passes(identity_genome):
    verdict = sphere_check(identity_genome)
    assert verdict.passed
    assert np.isfinite(verdict.best_final_loss)


def test_constant_update_fails(const1_genome):
    assert not sphere_check(const1_genome).passed


def test_gradient_ascent_fails(neg_g_genome):
    assert not sphere_check(neg_g_genome).passed


def test_verdict_threshold_relation(identity_genome):
    cfg = SphereConfig()
    verdict = sphere_check(identity_genome, cfg)
    f0 = float(np.sum(cfg.shifts ** 2))
    assert verdict.passed == (verdict.best_final_loss < cfg.pass_ratio * f0)
    assert verdict.best_lr in cfg.lr_set
    assert set(verdict.per_lr_loss) == set(cfg.lr_set)


def test_deterministic(identity_genome):
    a = sphere_check(identity_genome)
    b = sphere_check(identity_genome)
    assert a.per_lr_loss == b.per_lr_loss
    assert a.best_final_loss == b.best_final_loss


def test_adam_passes():
    assert sphere_check(catalog.build("Adam").genome).passed


def test_nonfinite_trajectory_counts_as_failure(neg_g_genome):
    verdict = sphere_check(neg_g_genome, SphereConfig(lr_set=(10.0,)))
    assert not verdict.passed
    assert verdict.per_lr_loss[10.0] == np.inf


def test_config_validation():
    with pytest.raises(ValueError):
        SphereConfig(iters=0)
    with pytest.raises(ValueError):
        SphereConfig(pass_ratio=1.5)
    with pytest.raises(ValueError):
        SphereConfig(lr_set=())


# ---------------------------------------------------------------------------
# decay range check

def test_identity_over_ld_in_range():
    assert decay_range_check(Graph([], Node(0, "x", ["ld"])))


def test_ld_plus_ld_out_of_range():
    assert not decay_range_check(Graph([], Node(0, "add", ["ld", "ld"])))


def test_sigmoid_of_ld_in_range():
    assert decay_range_check(Graph([], Node(0, "sigmoid", ["ld"])))


def test_boundaries_inclusive():
    # ld itself touches both 0 and 1 exactly and must still pass
    assert decay_range_check(Graph([], Node(0, "x", ["ld"])), grid=2)
    with pytest.raises(ValueError):
        decay_range_check(Graph([], Node(0, "x", ["ld"])), grid=1)
