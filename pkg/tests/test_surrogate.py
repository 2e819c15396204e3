import numpy as np
import pytest

from conftest import quick_fitness_config
from optevo import catalog
from optevo.surrogate import (ClassifierSpec, DatasetConfig, DatasetError,
                              fitness, gradients, init_params, loss_and_acc,
                              make_dataset, run_training, scaled_budget)


def test_two_moons_shape_and_determinism():
    a = make_dataset("two_moons", DatasetConfig(n=1000, seed=1))
    b = make_dataset("two_moons", DatasetConfig(n=1000, seed=1))
    assert len(a.X_train) + len(a.X_val) == 1000
    assert a.n_classes == 2 and a.chance == 0.5
    np.testing.assert_array_equal(a.X_train, b.X_train)
    np.testing.assert_array_equal(a.y_val, b.y_val)


def test_blobs_three_classes():
    d = make_dataset("blobs", DatasetConfig(n=300, centers=3))
    assert d.n_classes == 3
    assert set(np.unique(d.y_train)) == {0, 1, 2}


def test_spirals_two_classes():
    d = make_dataset("spirals", DatasetConfig(n=400))
    assert d.n_classes == 2
    assert d.X_train.shape[1] == 2


def test_unknown_kind_rejected():
    with pytest.raises(DatasetError):
        make_dataset("mnist")


def test_csv_round_trip(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("x1,x2,label\n0.5,1.0,0\n-1.0,2.0,1\n0.0,0.0,1\n1.0,1.0,0\n")
    d = make_dataset("csv", DatasetConfig(csv_path=str(p), val_frac=0.25))
    assert d.n_classes == 2
    assert len(d.X_train) + len(d.X_val) == 4


def test_csv_missing_label_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DatasetError, match="label"):
        make_dataset("csv", DatasetConfig(csv_path=str(p)))


def test_csv_malformed_row_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,label\n1.0,0\nnot_a_number,1\n")
    with pytest.raises(DatasetError, match="line 3"):
        make_dataset("csv", DatasetConfig(csv_path=str(p)))


# ---------------------------------------------------------------------------
# classifier

def test_gradients_match_finite_differences():
    data = make_dataset("two_moons", DatasetConfig(n=200, seed=1))
    spec = ClassifierSpec(in_dim=2, n_classes=2, base=8, seed=1)
    params = init_params(spec)
    X, y = data.X_train[:64], data.y_train[:64]
    _, _, grads = gradients(params, X, y)
    rng = np.random.default_rng(0)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        pi = int(rng.integers(len(params)))
        idx = tuple(int(rng.integers(s)) for s in params[pi].shape)
        orig = params[pi][idx]
        params[pi][idx] = orig + h
        lp, _ = loss_and_acc(params, X, y)
        params[pi][idx] = orig - h
        lm, _ = loss_and_acc(params, X, y)
        params[pi][idx] = orig
        fd = (lp - lm) / (2 * h)
        rel = abs(fd - grads[pi][idx]) / max(abs(fd), abs(grads[pi][idx]), 1e-8)
        worst = max(worst, rel)
    assert worst < 1e-5


def test_zero_steps_returns_untrained_val_acc():
    cfg = quick_fitness_config()
    res = run_training(catalog.build("Adam").genome, cfg.spec, cfg.dataset,
                       steps=0, lr=0.1, clock_T=1)
    assert 0.2 <= res.best_val_acc <= 0.8     # roughly chance, untrained
    assert res.steps_run == 0 and res.train_trace == []


def test_adam_trains_two_moons():
    cfg = quick_fitness_config()
    res = run_training(catalog.build("Adam").genome, cfg.spec, cfg.dataset,
                       steps=800, lr=0.01, clock_T=800)
    assert float(np.mean(res.train_trace[-50:])) > 0.9
    assert res.best_val_acc > 0.9


def test_constant_update_stays_near_chance(const1_genome):
    cfg = quick_fitness_config()
    res = run_training(const1_genome, cfg.spec, cfg.dataset,
                       steps=300, lr=0.1, clock_T=300)
    assert float(np.mean(res.train_trace[-50:])) < 0.65


# ---------------------------------------------------------------------------
# two-stage fitness

def test_fitness_stages(const1_genome):
    cfg = quick_fitness_config()
    assert fitness(catalog.build("Adam").genome, cfg).stage_reached == "completed"
    assert fitness(const1_genome, cfg).stage_reached == "lr_sweep_failed"
    forced = quick_fitness_config(force_lr=10.0)
    assert fitness(catalog.build("SGD").genome, forced).stage_reached == "aborted"


def test_fitness_deterministic():
    cfg = quick_fitness_config()
    a = fitness(catalog.build("RMSProp").genome, cfg)
    b = fitness(catalog.build("RMSProp").genome, cfg)
    assert a == b


def test_fitness_record_fields():
    cfg = quick_fitness_config()
    rec = fitness(catalog.build("Adam").genome, cfg)
    assert 0.0 <= rec.best_val_acc <= 1.0
    assert rec.best_lr in cfg.lr_set
    assert rec.steps_run > 0


def test_thetas_scale_with_chance():
    moons = quick_fitness_config()
    assert moons.resolved_thetas() == (0.65, 0.8)
    blobs = make_dataset("blobs", DatasetConfig(n=300, centers=3))
    cfg = quick_fitness_config()
    cfg.dataset = blobs
    t1, t2 = cfg.resolved_thetas()
    assert t1 == pytest.approx(1 / 3 + 0.15)
    assert t2 == pytest.approx(1 / 3 + 0.30)


def test_scaled_budget():
    cfg = quick_fitness_config()
    half = scaled_budget(cfg, 0.5, base=32)
    assert half.sweep_steps == 75 and half.full_steps == 600 and half.grace == 150
    assert half.spec.base == 32
    assert cfg.spec.base == 16   # original untouched
