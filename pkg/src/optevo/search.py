"""Mutation-only, particle-based genetic algorithm over optimizer genomes.

Particles are independent lineages: at each timestep a particle produces k
integrity-gated children and moves to the best one regardless of its own
fitness (aging). All randomness is keyed by (particle, timestep, child), so
results are invariant to evaluation order and concurrency.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import graph as graph_mod
from .graph import Genome, InitConfig, mutate, random_init
from .integrity import DEFAULT_LR_SET, SphereConfig, sphere_check
from .surrogate import (DatasetConfig, FitnessConfig, FitnessRecord, fitness,
                        make_fitness_config, scaled_budget)


class SearchError(RuntimeError):
    pass


@dataclass
class SearchConfig:
    n: int = 2
    k: int = 2
    t: int = 1
    seed: int = 0
    init_factor: int = 10
    mutation_mask: str = "full"          # full | decay_only
    attempts_cap: int = 50               # mutation/integrity loop bound per child
    init_reject_cap: int = 500           # rejection bound during initialization
    dataset: str = "two_moons"
    data_n: int = 1000
    data_seed: int = 1
    base: int = 16
    lr_set: tuple = DEFAULT_LR_SET
    sweep_steps: int = 800
    full_steps: int = 8000
    grace: int = 1000
    init_step_scale: float = 0.25        # reduced budget for the enlarged init
    batch_size: int = 64
    eval_every: int = 25
    p_decay: float = 0.2
    # serialized genomes used as fixed initial particles (e.g. a catalog entry)
    seed_genomes: list | None = None
    # elimination stages: list of {keep, step_scale, base, repeats}
    stages: list = field(default_factory=list)

    def __post_init__(self):
        if min(self.n, self.k, self.t) < 1 or self.init_factor < 1:
            raise SearchError("n, k, t and init_factor must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lr_set"] = list(self.lr_set)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        d = dict(d)
        d["lr_set"] = tuple(d.get("lr_set", DEFAULT_LR_SET))
        return cls(**d)

    def fitness_config(self) -> FitnessConfig:
        return make_fitness_config(
            self.dataset, DatasetConfig(n=self.data_n, seed=self.data_seed),
            base=self.base, lr_set=self.lr_set, sweep_steps=self.sweep_steps,
            full_steps=self.full_steps, grace=self.grace, seed=self.seed,
            batch_size=self.batch_size, eval_every=self.eval_every)

    def init_config(self) -> InitConfig:
        return InitConfig(p_decay=self.p_decay)


@dataclass
class ChildRecord:
    particle: int
    timestep: int
    child: int
    attempts: int
    skipped: bool
    genome_text: str | None
    fitness: dict | None

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SearchRun:
    config: SearchConfig
    particles: list          # list of (Genome, FitnessRecord)
    history: list            # ChildRecord, in (timestep, particle, child) order
    completed_timesteps: int = 0


def _record_to_dict(rec: FitnessRecord) -> dict:
    return dataclasses.asdict(rec)


def _record_from_dict(d: dict) -> FitnessRecord:
    return FitnessRecord(**d)


def _rng_for(cfg: SearchConfig, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, *key]))


def enlarged_init(cfg: SearchConfig, jobs: int = 1) -> list:
    """Generate init_factor*n integrity-passing genomes (or use the configured
    seed genomes), score them at a reduced budget, keep the best n."""
    init_cfg = cfg.init_config()
    sphere_cfg = SphereConfig(lr_set=cfg.lr_set)
    if cfg.seed_genomes:
        pool = [graph_mod.deserialize(text) for text in cfg.seed_genomes]
        candidates = [pool[i % len(pool)] for i in range(cfg.n)]
    else:
        candidates = []
        for i in range(cfg.init_factor * cfg.n):
            rng = _rng_for(cfg, 0, i)
            for _ in range(cfg.init_reject_cap):
                genome = random_init(rng, init_cfg)
                if sphere_check(genome, sphere_cfg).passed:
                    candidates.append(genome)
                    break
            else:
                raise SearchError(
                    f"initialization rejection loop exhausted after {cfg.init_reject_cap} tries")
    fit_cfg = scaled_budget(cfg.fitness_config(), cfg.init_step_scale)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool_exec:
        records = list(pool_exec.map(lambda g: fitness(g, fit_cfg), candidates))
    order = sorted(range(len(candidates)),
                   key=lambda i: (-records[i].best_val_acc, i))
    return [(candidates[i], records[i]) for i in order[: cfg.n]]


def _spawn_child(parent: Genome, cfg: SearchConfig, fit_cfg: FitnessConfig,
                 sphere_cfg: SphereConfig, particle: int, timestep: int,
                 child: int) -> ChildRecord:
    """Mutate until the child passes the sphere check and the stage-1 sweep."""
    rng = _rng_for(cfg, 1, particle, timestep, child)
    init_cfg = cfg.init_config()
    for attempt in range(1, cfg.attempts_cap + 1):
        cand = mutate(parent, rng, init_cfg, mask=cfg.mutation_mask)
        if not sphere_check(cand, sphere_cfg).passed:
            continue
        rec = fitness(cand, fit_cfg)
        if rec.stage_reached == "lr_sweep_failed":
            continue
        return ChildRecord(particle, timestep, child, attempt, False,
                           graph_mod.serialize(cand), _record_to_dict(rec))
    return ChildRecord(particle, timestep, child, cfg.attempts_cap, True, None, None)


def ga_step(parent: Genome, cfg: SearchConfig, particle: int, timestep: int,
            jobs: int = 1, executor: ThreadPoolExecutor | None = None):
    """One aging step: k children, argmax child becomes the new position.

    Ties break toward the lowest child index; if every child slot was skipped
    the particle stays in place (keeps the run alive).
    """
    fit_cfg = cfg.fitness_config()
    sphere_cfg = SphereConfig(lr_set=cfg.lr_set)
    args = [(parent, cfg, fit_cfg, sphere_cfg, particle, timestep, c)
            for c in range(cfg.k)]
    if executor is not None:
        children = list(executor.map(lambda a: _spawn_child(*a), args))
    elif jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            children = list(ex.map(lambda a: _spawn_child(*a), args))
    else:
        children = [_spawn_child(*a) for a in args]
    viable = [c for c in children if not c.skipped]
    if not viable:
        return parent, None, children
    best = max(viable, key=lambda c: (c.fitness["best_val_acc"], -c.child))
    return graph_mod.deserialize(best.genome_text), _record_from_dict(best.fitness), children


def select_from_history(cfg: SearchConfig, initial: list, history: list) -> list:
    """Replay selection decisions from stored child records."""
    particles = list(initial)
    by_step = {}
    for rec in history:
        by_step.setdefault((rec.timestep, rec.particle), []).append(rec)
    for timestep in range(cfg.t):
        for p in range(cfg.n):
            children = sorted(by_step.get((timestep, p), []), key=lambda c: c.child)
            viable = [c for c in children if not c.skipped]
            if viable:
                best = max(viable, key=lambda c: (c.fitness["best_val_acc"], -c.child))
                particles[p] = (graph_mod.deserialize(best.genome_text),
                                _record_from_dict(best.fitness))
    return particles


# ---------------------------------------------------------------------------
# run directory layout: config.json, checkpoint.json, history_t<N>.jsonl,
# ranking.csv; checkpoint writes are atomic (temp file + rename).

def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _save_checkpoint(run_dir: str, run: SearchRun) -> None:
    payload = {
        "config": run.config.to_dict(),
        "completed_timesteps": run.completed_timesteps,
        "particles": [{"genome": graph_mod.genome_to_dict(g),
                       "fitness": _record_to_dict(r)} for g, r in run.particles],
    }
    _atomic_write(os.path.join(run_dir, "checkpoint.json"),
                  json.dumps(payload, sort_keys=True, indent=1))


def load_checkpoint(run_dir: str) -> SearchRun:
    with open(os.path.join(run_dir, "checkpoint.json")) as fh:
        payload = json.load(fh)
    cfg = SearchConfig.from_dict(payload["config"])
    particles = [(graph_mod.genome_from_dict(p["genome"]),
                  _record_from_dict(p["fitness"])) for p in payload["particles"]]
    history = _load_history(run_dir)
    return SearchRun(cfg, particles, history, payload["completed_timesteps"])


def _load_history(run_dir: str) -> list:
    history = []
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("history_t") and name.endswith(".jsonl"):
            with open(os.path.join(run_dir, name)) as fh:
                for line in fh:
                    history.append(ChildRecord(**json.loads(line)))
    history.sort(key=lambda r: (r.timestep, r.particle, r.child))
    return history


def _write_history(run_dir: str, timestep: int, records: list) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True)
             for r in sorted(records, key=lambda r: (r.particle, r.child))]
    _atomic_write(os.path.join(run_dir, f"history_t{timestep}.jsonl"),
                  "\n".join(lines) + "\n")


def write_ranking(run_dir: str, run: SearchRun) -> str:
    order = sorted(range(len(run.particles)),
                   key=lambda i: (-run.particles[i][1].best_val_acc, i))
    lines = ["rank,particle,uid,best_val_acc,best_lr,stage_reached"]
    for rank, i in enumerate(order, start=1):
        genome, rec = run.particles[i]
        lines.append(f"{rank},{i},{genome.uid},{rec.best_val_acc!r},"
                     f"{rec.best_lr!r},{rec.stage_reached}")
    path = os.path.join(run_dir, "ranking.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def run_search(cfg: SearchConfig, run_dir: str, jobs: int = 1,
               resume: bool = False) -> SearchRun:
    """Execute (or resume) a full search; checkpoints before each timestep."""
    os.makedirs(run_dir, exist_ok=True)
    if resume:
        run = load_checkpoint(run_dir)
        cfg = run.config
    else:
        particles = enlarged_init(cfg, jobs=jobs)
        run = SearchRun(cfg, particles, [], 0)
        _save_checkpoint(run_dir, run)

    fit_cfg = cfg.fitness_config()
    sphere_cfg = SphereConfig(lr_set=cfg.lr_set)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        for timestep in range(run.completed_timesteps, cfg.t):
            step_records = []
            futures = []
            for p, (genome, _) in enumerate(run.particles):
                for c in range(cfg.k):
                    futures.append(((p, c), executor.submit(
                        _spawn_child, genome, cfg, fit_cfg, sphere_cfg,
                        p, timestep, c)))
            results = {key: fut.result() for key, fut in futures}
            new_particles = list(run.particles)
            for p in range(cfg.n):
                children = [results[(p, c)] for c in range(cfg.k)]
                step_records.extend(children)
                viable = [c for c in children if not c.skipped]
                if viable:
                    best = max(viable, key=lambda c: (c.fitness["best_val_acc"], -c.child))
                    new_particles[p] = (graph_mod.deserialize(best.genome_text),
                                        _record_from_dict(best.fitness))
            run.particles = new_particles
            run.history.extend(sorted(step_records, key=lambda r: (r.particle, r.child)))
            run.completed_timesteps = timestep + 1
            _write_history(run_dir, timestep, step_records)
            _save_checkpoint(run_dir, run)

    write_ranking(run_dir, run)
    return run


def eliminate(genomes: list, stages: list, base_cfg: FitnessConfig) -> list:
    """Staged re-evaluation at growing budgets; each stage keeps the best cut.

    `stages` entries: {"keep": int, "step_scale": float, "base": int|None,
    "repeats": int}. Returns [(genome, [per-stage mean fitness])] ranked by
    the final stage's mean.
    """
    survivors = [(g, []) for g in genomes]
    prev_keep = len(genomes) + 1
    for stage in stages:
        keep = int(stage["keep"])
        if keep >= prev_keep:
            raise SearchError("stage cuts must be strictly decreasing")
        prev_keep = keep
        repeats = int(stage.get("repeats", 1))
        means = []
        for genome, trail in survivors:
            vals = [fitness(genome, scaled_budget(base_cfg, stage.get("step_scale", 1.0),
                                                  stage.get("base"), seed=base_cfg.seed + rep)
                            ).best_val_acc
                    for rep in range(repeats)]
            means.append(float(np.mean(vals)))
        order = sorted(range(len(survivors)), key=lambda i: (-means[i], i))
        survivors = [(survivors[i][0], survivors[i][1] + [means[i]])
                     for i in order[:keep]]
    return survivors
