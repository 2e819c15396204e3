"""Desk-scale fitness: a small feedforward classifier trained with analytic
gradients under a candidate optimizer, with two-stage early stopping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.datasets import make_blobs, make_moons

from . import engine
from .integrity import DEFAULT_LR_SET
from .schedules import Clock, DEFAULT_HOLD_FRAC, DEFAULT_WARM_FRAC, one_cycle


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    n_classes: int

    @property
    def chance(self) -> float:
        return 1.0 / self.n_classes


@dataclass
class DatasetConfig:
    n: int = 1000
    seed: int = 1
    noise: float = 0.15
    centers: int = 3
    val_frac: float = 0.2
    csv_path: str | None = None


def _split(X, y, val_frac, seed) -> Dataset:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(X))
    X, y = X[order], y[order]
    n_val = max(1, int(round(val_frac * len(X))))
    n_classes = int(y.max()) + 1
    return Dataset(X[n_val:], y[n_val:], X[:n_val], y[:n_val], n_classes)


def _spirals(n, noise, seed):
    rng = np.random.default_rng(seed)
    half = n // 2
    theta = np.sqrt(rng.random(half)) * 3 * np.pi
    X, y = [], []
    for cls, flip in ((0, 1.0), (1, -1.0)):
        r = theta / (3 * np.pi)
        pts = np.stack([r * np.cos(theta) * flip, r * np.sin(theta) * flip], axis=1)
        X.append(pts + noise * rng.standard_normal(pts.shape))
        y.append(np.full(half, cls))
    return np.concatenate(X), np.concatenate(y)


def _from_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if "label" not in header:
            raise DatasetError(f"{path}: header has no 'label' column")
        label_idx = header.index("label")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                labels.append(int(row[label_idx]))
                feats.append([float(v) for i, v in enumerate(row) if i != label_idx])
            except ValueError as e:
                raise DatasetError(f"{path}: line {lineno}: {e}") from None
    if not feats:
        raise DatasetError(f"{path}: no data rows")
    return np.asarray(feats, dtype=np.float64), np.asarray(labels)


def make_dataset(kind: str, cfg: DatasetConfig | None = None) -> Dataset:
    cfg = cfg or DatasetConfig()
    if kind == "two_moons":
        X, y = make_moons(n_samples=cfg.n, noise=cfg.noise, random_state=cfg.seed)
    elif kind == "blobs":
        X, y = make_blobs(n_samples=cfg.n, centers=cfg.centers, cluster_std=1.0,
                          random_state=cfg.seed)
    elif kind == "spirals":
        X, y = _spirals(cfg.n, cfg.noise, cfg.seed)
    elif kind == "csv":
        if cfg.csv_path is None:
            raise DatasetError("csv dataset requires csv_path")
        X, y = _from_csv(cfg.csv_path)
    else:
        raise DatasetError(f"unknown dataset kind {kind!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return _split(X, y, cfg.val_frac, cfg.seed)


# ---------------------------------------------------------------------------
# classifier: two tanh hidden layers (widths base and 2*base) + softmax head

@dataclass
class ClassifierSpec:
    in_dim: int = 2
    n_classes: int = 2
    base: int = 16
    seed: int = 0


def init_params(spec: ClassifierSpec) -> list:
    rng = np.random.default_rng(spec.seed)
    dims = [spec.in_dim, spec.base, 2 * spec.base, spec.n_classes]
    params = []
    for d_in, d_out in zip(dims, dims[1:]):
        params.append(rng.standard_normal((d_in, d_out)) / np.sqrt(d_in))
        params.append(np.zeros(d_out))
    return params


def _forward(params, X):
    W1, b1, W2, b2, W3, b3 = params
    h1 = np.tanh(X @ W1 + b1)
    h2 = np.tanh(h1 @ W2 + b2)
    logits = h2 @ W3 + b3
    return h1, h2, logits


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_acc(params, X, y):
    _, _, logits = _forward(params, X)
    p = _softmax(logits)
    nll = -np.log(p[np.arange(len(y)), y] + 1e-300)
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    return float(np.mean(nll)), acc


def gradients(params, X, y):
    """Analytic backprop; returns (loss, acc, grads aligned with params)."""
    W1, b1, W2, b2, W3, b3 = params
    h1, h2, logits = _forward(params, X)
    p = _softmax(logits)
    n = len(y)
    nll = -np.log(p[np.arange(n), y] + 1e-300)
    acc = float(np.mean(np.argmax(logits, axis=1) == y))

    d_logits = p.copy()
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    gW3 = h2.T @ d_logits
    gb3 = d_logits.sum(axis=0)
    d_h2 = (d_logits @ W3.T) * (1.0 - h2 * h2)
    gW2 = h1.T @ d_h2
    gb2 = d_h2.sum(axis=0)
    d_h1 = (d_h2 @ W2.T) * (1.0 - h1 * h1)
    gW1 = X.T @ d_h1
    gb1 = d_h1.sum(axis=0)
    return float(np.mean(nll)), acc, [gW1, gb1, gW2, gb2, gW3, gb3]


# ---------------------------------------------------------------------------
# training loop and two-stage fitness

@dataclass
class TrainResult:
    train_trace: list
    best_val_acc: float
    steps_run: int
    aborted: bool
    halted_nonfinite: bool


def _val_acc(params, data: Dataset) -> float:
    _, acc = loss_and_acc(params, data.X_val, data.y_val)
    return acc


def run_training(genome, spec: ClassifierSpec, data: Dataset, steps: int, lr: float,
                 clock_T: int, seed: int = 0, batch_size: int = 64, eval_every: int = 25,
                 warm_frac: float = DEFAULT_WARM_FRAC, hold_frac: float = DEFAULT_HOLD_FRAC,
                 abort_after: int | None = None, abort_below: float | None = None,
                 acc_window: int = 50) -> TrainResult:
    """Minibatch training with the genome as optimizer; deterministic per seed."""
    if steps > clock_T:
        raise ValueError("steps must not exceed clock_T")
    params = init_params(spec)
    states = [engine.init_state(genome, p.shape, rng_seed=seed * 1000 + i)
              for i, p in enumerate(params)]
    batch_rng = np.random.default_rng([seed, 0xBA7C4])
    n_train = len(data.X_train)
    trace = []
    best_val = _val_acc(params, data) if steps == 0 else 0.0
    aborted = halted = False
    t = 0
    for t in range(steps):
        idx = batch_rng.integers(0, n_train, size=min(batch_size, n_train))
        loss, acc, grads = gradients(params, data.X_train[idx], data.y_train[idx])
        if not np.isfinite(loss):
            halted = True
            break
        trace.append(acc)
        clock = Clock(t, clock_T)
        lr_t = lr * one_cycle(clock, warm_frac, hold_frac)
        params = [engine.apply_step(genome, st, p, gr, lr_t, clock)
                  for st, p, gr in zip(states, params, grads)]
        if (t + 1) % eval_every == 0:
            best_val = max(best_val, _val_acc(params, data))
        if abort_after is not None and t + 1 >= abort_after:
            recent = float(np.mean(trace[-acc_window:]))
            if recent < abort_below:
                aborted = True
                break
    if not halted and all(np.all(np.isfinite(p)) for p in params):
        best_val = max(best_val, _val_acc(params, data))
    return TrainResult(trace, best_val, min(t + 1, steps), aborted, halted)


def train_eval(genome, spec, data, steps, lr, clock_T, seed=0, **kw):
    res = run_training(genome, spec, data, steps, lr, clock_T, seed=seed, **kw)
    return res.train_trace, res.best_val_acc


@dataclass
class FitnessRecord:
    best_val_acc: float
    best_lr: float
    stage_reached: str  # lr_sweep_failed | aborted | completed
    steps_run: int


@dataclass
class FitnessConfig:
    dataset: Dataset
    spec: ClassifierSpec
    lr_set: tuple = DEFAULT_LR_SET
    sweep_steps: int = 800
    full_steps: int = 8000
    grace: int = 1000
    theta1: float | None = None  # defaults to chance + 0.15
    theta2: float | None = None  # defaults to chance + 0.30
    seed: int = 0
    batch_size: int = 64
    eval_every: int = 25
    acc_window: int = 50
    force_lr: float | None = None

    def resolved_thetas(self):
        c = self.dataset.chance
        return (self.theta1 if self.theta1 is not None else c + 0.15,
                self.theta2 if self.theta2 is not None else c + 0.30)


def make_fitness_config(dataset_kind: str = "two_moons", data_cfg: DatasetConfig | None = None,
                        base: int = 16, model_seed: int = 1, **overrides) -> FitnessConfig:
    data = make_dataset(dataset_kind, data_cfg)
    spec = ClassifierSpec(in_dim=data.X_train.shape[1], n_classes=data.n_classes,
                          base=base, seed=model_seed)
    return FitnessConfig(dataset=data, spec=spec, **overrides)


def fitness(genome, cfg: FitnessConfig) -> FitnessRecord:
    """Two-stage evaluation: LR sweep with a train-accuracy gate, then a long
    run at the best LR with a post-grace abort threshold."""
    theta1, theta2 = cfg.resolved_thetas()
    steps_total = 0
    best_val = 0.0

    if cfg.force_lr is not None:
        best_lr = cfg.force_lr
    else:
        best_lr, best_gate = None, -1.0
        for lr in cfg.lr_set:
            res = run_training(genome, cfg.spec, cfg.dataset, cfg.sweep_steps, lr,
                               clock_T=cfg.sweep_steps, seed=cfg.seed,
                               batch_size=cfg.batch_size, eval_every=cfg.eval_every,
                               acc_window=cfg.acc_window)
            steps_total += res.steps_run
            best_val = max(best_val, res.best_val_acc)
            gate = float(np.mean(res.train_trace[-cfg.acc_window:])) if res.train_trace else 0.0
            if gate > best_gate:
                best_gate, best_lr = gate, lr
        if best_gate < theta1:
            return FitnessRecord(best_val, best_lr, "lr_sweep_failed", steps_total)

    res = run_training(genome, cfg.spec, cfg.dataset, cfg.full_steps, best_lr,
                       clock_T=cfg.full_steps, seed=cfg.seed,
                       batch_size=cfg.batch_size, eval_every=cfg.eval_every,
                       abort_after=cfg.grace, abort_below=theta2,
                       acc_window=cfg.acc_window)
    steps_total += res.steps_run
    best_val = max(best_val, res.best_val_acc)
    stage = "aborted" if (res.aborted or res.halted_nonfinite) else "completed"
    return FitnessRecord(best_val, best_lr, stage, steps_total)


def scaled_budget(cfg: FitnessConfig, step_scale: float = 1.0, base: int | None = None,
                  seed: int | None = None) -> FitnessConfig:
    """Derive a config with a scaled step budget and/or wider classifier."""
    spec = cfg.spec if base is None else replace(cfg.spec, base=base)
    return replace(cfg, spec=spec,
                   sweep_steps=max(1, int(cfg.sweep_steps * step_scale)),
                   full_steps=max(1, int(cfg.full_steps * step_scale)),
                   grace=max(1, int(cfg.grace * step_scale)),
                   seed=cfg.seed if seed is None else seed)
