"""Command-line entry point tying the modules into a usable tool.

Exit codes: 0 ok, 1 usage, 2 bad config/input, 3 runtime failure.
All emitted tables are CSV with header rows.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, catalog, engine, graph, integrity, schedules, search, surrogate
from .graph import GenomeError
from .schedules import Clock
from .search import SearchConfig, SearchError
from .surrogate import DatasetError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULT_SLICES = (1000, 10000, 25000, 45000, 65000, 75000, 85000, 95000)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_genome(ref: str) -> graph.Genome:
    """Resolve a genome from a file path or a catalog name."""
    if os.path.exists(ref):
        with open(ref) as fh:
            return graph.deserialize(fh.read())
    if ref in catalog.names():
        return catalog.build(ref).genome
    raise GenomeError(f"{ref!r} is neither a genome file nor a catalog name")


def _out(path, lines):
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommand implementations

def _cmd_catalog(args):
    if args.action == "list":
        print("name,kind")
        for name in catalog.names():
            kind = ("discovered" if name in catalog.DISCOVERED
                    else "adam_variant" if name in catalog.ADAM_VARIANTS
                    else "ablation" if name in catalog.ABLATIONS else "baseline")
            print(f"{name},{kind}")
    else:
        print(graph.serialize(catalog.build(args.name).genome))
    return EXIT_OK


def _cmd_fmt(args):
    print(graph.pretty_print(_load_genome(args.genome)))
    return EXIT_OK


def _cmd_check(args):
    genome = _load_genome(args.genome)
    cfg = integrity.SphereConfig(iters=args.iters, pass_ratio=args.pass_ratio)
    verdict = integrity.sphere_check(genome, cfg)
    print("lr,final_loss")
    for lr, loss in verdict.per_lr_loss.items():
        print(f"{lr!r},{loss!r}")
    print(f"passed,{str(verdict.passed).lower()}")
    return EXIT_OK if verdict.passed else EXIT_OK


def _read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty trace file")
    start = 1 if not rows[0][0].lstrip("-").replace(".", "", 1).isdigit() else 0
    try:
        return [np.array([float(v) for v in row[1:]]) for row in rows[start:]]
    except ValueError as e:
        raise DatasetError(f"{path}: {e}") from None


def _cmd_eval(args):
    genome = _load_genome(args.genome)
    grads = _read_trace(args.trace)
    if not grads:
        raise DatasetError("trace has no gradient rows")
    dim = len(grads[0])
    w = np.zeros(dim)
    state = engine.init_state(genome, (dim,), rng_seed=args.seed)
    T = args.T or len(grads)
    lines = ["step," + ",".join(f"u{i}" for i in range(dim))]
    for t, g in enumerate(grads):
        w, u, _ = engine.step_with_report(genome, state, w, g, args.lr,
                                          Clock(min(t, T), T))
        lines.append(f"{t}," + ",".join(repr(float(v)) for v in u))
    _out(args.output, lines)
    return EXIT_OK


def _cmd_bench(args):
    cfg = surrogate.make_fitness_config(
        args.dataset, surrogate.DatasetConfig(seed=args.data_seed),
        seed=args.seed, sweep_steps=args.sweep_steps,
        full_steps=args.full_steps, grace=args.grace)
    print("genome,best_val_acc,best_lr,stage_reached,steps_run")
    for ref in args.genomes:
        rec = surrogate.fitness(_load_genome(ref), cfg)
        print(f"{ref},{rec.best_val_acc!r},{rec.best_lr!r},{rec.stage_reached},{rec.steps_run}")
    return EXIT_OK


def _cmd_plot(args):
    T = args.T
    if args.what == "schedules":
        header, rows = schedules.schedule_table(T)
        lines = [",".join(header)]
        lines += [",".join(repr(float(v)) for v in row) for row in rows]
    elif args.what == "lr":
        lines = ["t," + ",".join(schedules.LR_NAMES)]
        for t in range(0, T + 1, max(1, T // args.points)):
            clock = Clock(t, T)
            vals = [schedules.catalog_lr(name, clock) for name in schedules.LR_NAMES]
            lines.append(f"{t}," + ",".join(repr(float(v)) for v in vals))
    elif args.what == "decay":
        genome = _load_genome(args.genome)
        edges = [(n.id, s, dg) for n in genome.graph.nodes()
                 for s, dg in enumerate(n.decays or []) if dg is not None]
        if not edges:
            raise GenomeError("genome has no decay graphs to plot")
        lines = ["t," + ",".join(f"node{nid}_slot{s}" for nid, s, _ in edges)]
        for t in range(0, T + 1, max(1, T // args.points)):
            clock = Clock(t, T)
            vals = [schedules.eval_decay_graph(dg, clock) for _, _, dg in edges]
            lines.append(f"{t}," + ",".join(repr(v) for v in vals))
    else:  # surface
        genome = _load_genome(args.genome)
        g_grid = np.linspace(args.gmin, args.gmax, args.points)
        lines = ["t,g,update"]
        for t in args.slices:
            state = engine.init_state(genome, g_grid.shape)
            for _ in range(args.warm_steps):
                engine.update_emas(state, g_grid)
            u, _ = engine.compute_update(genome, state, g_grid,
                                         np.zeros_like(g_grid), Clock(min(t, T), T))
            lines.extend(f"{t},{g!r},{float(v)!r}" for g, v in zip(g_grid, u))
    _out(args.output, lines)
    return EXIT_OK


def _write_manifest(run_dir, args, cfg):
    manifest = {
        "command": " ".join(sys.argv[1:]),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "artifacts": ["checkpoint.json", "ranking.csv"],
        "tool_version": __version__,
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)


def _search_config(args, seed_genomes=None) -> SearchConfig:
    cfg_dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg_dict.update(json.load(fh))
    for key in ("n", "k", "t", "seed", "init_factor", "dataset", "base",
                "sweep_steps", "full_steps", "grace", "mutation_mask",
                "init_step_scale", "data_seed", "data_n"):
        val = getattr(args, key, None)
        if val is not None:
            cfg_dict[key] = val
    if seed_genomes is not None:
        cfg_dict["seed_genomes"] = seed_genomes
    if "seed" not in cfg_dict:
        raise SearchError("--seed is mandatory for search commands")
    return SearchConfig.from_dict(cfg_dict)


def _cmd_search(args):
    if args.action == "resume":
        run = search.run_search(None, args.run_dir, jobs=args.jobs, resume=True)
        print(os.path.join(args.run_dir, "ranking.csv"))
        return EXIT_OK
    if args.action == "eliminate":
        run = search.load_checkpoint(args.run_dir)
        stages = json.loads(args.stages)
        ranked = search.eliminate([g for g, _ in run.particles], stages,
                                  run.config.fitness_config())
        print("rank,uid,stage_means")
        for rank, (genome, means) in enumerate(ranked, start=1):
            print(f"{rank},{genome.uid}," + ";".join(repr(m) for m in means))
        return EXIT_OK

    seed_genomes = None
    if args.action == "seed-from-catalog":
        seed_genomes = [graph.serialize(catalog.build(args.name).genome)]
    cfg = _search_config(args, seed_genomes)
    os.makedirs(args.run_dir, exist_ok=True)
    _write_manifest(args.run_dir, args, cfg)
    search.run_search(cfg, args.run_dir, jobs=args.jobs)
    print(os.path.join(args.run_dir, "ranking.csv"))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    p = _Parser(prog="optevo",
                description="Evolve and inspect graph-encoded optimizers")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("catalog", help="list or export catalog genomes")
    csub = c.add_subparsers(dest="action", required=True)
    csub.add_parser("list")
    ce = csub.add_parser("export")
    ce.add_argument("name")

    f = sub.add_parser("fmt", help="pretty-print a genome")
    f.add_argument("genome")

    k = sub.add_parser("check", help="run the sphere integrity check")
    k.add_argument("genome")
    k.add_argument("--iters", type=int, default=200)
    k.add_argument("--pass-ratio", type=float, default=0.1)

    e = sub.add_parser("eval", help="run a gradient trace through a genome")
    e.add_argument("genome")
    e.add_argument("trace")
    e.add_argument("--lr", type=float, default=0.01)
    e.add_argument("--T", type=int, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("-o", "--output", default=None)

    b = sub.add_parser("bench", help="fitness table for genome files")
    b.add_argument("genomes", nargs="+")
    b.add_argument("--dataset", default="two_moons")
    b.add_argument("--data-seed", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--sweep-steps", type=int, default=800)
    b.add_argument("--full-steps", type=int, default=8000)
    b.add_argument("--grace", type=int, default=1000)

    pl = sub.add_parser("plot", help="emit schedule/decay/LR/surface tables as CSV")
    pl.add_argument("what", choices=["schedules", "decay", "lr", "surface"])
    pl.add_argument("genome", nargs="?", help="genome file or catalog name (decay/surface)")
    pl.add_argument("--T", type=int, default=1000)
    pl.add_argument("--points", type=int, default=101)
    pl.add_argument("--gmin", type=float, default=-20.0)
    pl.add_argument("--gmax", type=float, default=20.0)
    pl.add_argument("--warm-steps", type=int, default=20)
    pl.add_argument("--slices", type=int, nargs="+", default=list(DEFAULT_SLICES))
    pl.add_argument("-o", "--output", default=None)

    s = sub.add_parser("search", help="run/resume/eliminate a GA search")
    ssub = s.add_subparsers(dest="action", required=True)

    def add_run_flags(sp):
        sp.add_argument("--run-dir", "--out", dest="run_dir", required=True)
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--jobs", type=int, default=1)
        for flag, typ in (("--n", int), ("--k", int), ("--t", int),
                          ("--init-factor", int), ("--base", int),
                          ("--sweep-steps", int), ("--full-steps", int),
                          ("--grace", int), ("--data-seed", int), ("--data-n", int)):
            sp.add_argument(flag, type=typ, default=None,
                            dest=flag.lstrip("-").replace("-", "_"))
        sp.add_argument("--init-step-scale", type=float, default=None,
                        dest="init_step_scale")
        sp.add_argument("--dataset", default=None)
        sp.add_argument("--mutation-mask", choices=["full", "decay_only"],
                        default=None, dest="mutation_mask")

    sr = ssub.add_parser("run")
    add_run_flags(sr)
    sres = ssub.add_parser("resume")
    sres.add_argument("run_dir")
    sres.add_argument("--jobs", type=int, default=1)
    sel = ssub.add_parser("eliminate")
    sel.add_argument("run_dir")
    sel.add_argument("--stages", required=True,
                     help='JSON list, e.g. \'[{"keep":4,"repeats":3,"step_scale":1.0}]\'')
    ssc = ssub.add_parser("seed-from-catalog")
    ssc.add_argument("name")
    add_run_flags(ssc)

    return p


_HANDLERS = {"catalog": _cmd_catalog, "fmt": _cmd_fmt, "check": _cmd_check,
             "eval": _cmd_eval, "bench": _cmd_bench, "plot": _cmd_plot,
             "search": _cmd_search}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _HANDLERS[args.cmd](args)
    except (GenomeError, DatasetError, SearchError, KeyError, FileNotFoundError,
            json.JSONDecodeError) as e:
        print(f"optevo: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - defensive
        print(f"optevo: runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
