"""Command line entry point: ``piprl <command> ...``.

Exit status: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import ppo
from ..dsl import DSLError, load_program, pretty_print
from ..sim.floorplan import MapFormatError, read_map
from ..sim.propagation import trace_paths
from . import report
from .ablate import ablate as run_ablation
from .ablate import ordering_holds
from .agent import KINDS, run_episode, episode_rngs
from .config import ConfigError, bundled_config, bundled_map, bundled_program, load_config
from .evaluate import evaluate
from .tasks import task_plan
from .train import DROPS, load_suite, make_agent, train, write_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _existing(path: str, bundled) -> Path:
    p = Path(path)
    if p.exists():
        return p
    alt = bundled(p.stem)
    if alt.exists():
        return alt
    raise UsageError(f"no such file: {path}")


# -- commands ----------------------------------------------------------------

def cmd_parse(args) -> int:
    path = _existing(args.program, bundled_program)
    try:
        program = load_program(path.read_text(encoding="utf-8"))
    except DSLError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.quiet:
        names = ", ".join(d.name for d in program.declarations)
        print(f"ok: {len(program.declarations)} declaration(s): {names}")
    else:
        sys.stdout.write(pretty_print(program))
    return EXIT_OK


def cmd_trace(args) -> int:
    plan = read_map(_existing(args.map, bundled_map))
    if not plan.is_free(args.x, args.y):
        raise UsageError(f"receiver ({args.x}, {args.y}) is not in free space")
    res = trace_paths(plan, (args.x, args.y), args.max_reflections, args.max_paths)
    rows = [{"rank": i + 1, "reflections": p.reflections, "length_m": round(p.length, 4),
             "snr_db": round(p.snr, 3), "aoa_deg": round(p.aoa, 3), "aod_deg": round(p.aod, 3)}
            for i, p in enumerate(res.paths)]
    cols = ("rank", "reflections", "length_m", "snr_db", "aoa_deg", "aod_deg")
    print(",".join(cols))
    for r in rows:
        print(",".join(str(r[c]) for c in cols))
    ell = "none" if res.link_state is None else res.link_state
    print(f"# {len(rows)} path(s), link state {ell}", file=sys.stderr)
    return EXIT_OK


def _config(args):
    cfg = load_config(_existing(args.config, bundled_config))
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "repeats", None) is not None:
        over["eval_repeats"] = args.repeats
    return cfg.with_overrides(**over) if over else cfg


def _out_dir(args, cfg, sub: str) -> Path:
    return Path(args.out) if args.out else cfg.resolve(cfg.output_dir) / sub


def cmd_train(args) -> int:
    cfg = _config(args)
    drop = tuple(args.drop or ())
    out = _out_dir(args, cfg, f"train-{args.policy}" + "".join(f"-no-{d}" for d in drop))
    plans, tasks = load_suite(cfg)
    if not tasks:
        raise UsageError("the config selects no tasks")
    result = train(cfg, args.policy, drop, out_dir=out, resume=args.resume, plans=plans, tasks=tasks)
    summary = result.summary()
    summary["tasks"] = [t.key() for t in tasks]
    report.write_json(out / "summary.json", summary)
    report.plot_learning_curve(result.episodes, out / "learning_curve.png")
    print(f"trained {summary['policy']}: {summary['total_episodes']} episode(s), "
          f"{summary['ppo_updates']} update(s) -> {out}")
    return EXIT_OK


def _eval_agent(spec: str, cfg):
    if spec in KINDS:
        return make_agent(spec, cfg)
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"--policy must be one of {', '.join(KINDS)} or a checkpoint file")
    net, _, _, extra = ppo.load_checkpoint(path)
    kind = extra.get("kind", "piprl")
    return make_agent(kind, cfg, tuple(extra.get("drop", ())), net)


def cmd_eval(args) -> int:
    cfg = _config(args)
    agent = _eval_agent(args.policy, cfg)
    plans, tasks = load_suite(cfg)
    if not tasks:
        raise UsageError("the config selects no tasks")
    out = _out_dir(args, cfg, f"eval-{agent.label}")
    rows: list = []
    rep = evaluate(cfg, agent, tasks, plans, rows=rows)
    task = tasks[0]
    ep = run_episode(plans[task.map_id], task, agent, cfg, episode_rngs(cfg.seed, 0, 0))
    report.write_eval_outputs(out, rep, rows, task_plan(plans[task.map_id], task), ep.path)
    for cat, s in rep.categories.items():
        npl = "n/a" if s["npl_mean"] is None else f"{s['npl_mean']:.3f}"
        print(f"{rep.policy} {cat}: NPL {npl}  success {s['success_rate']:.2f}  ({s['episodes']} ep)")
    print(f"-> {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    drops = tuple((d,) for d in (args.drop or sorted(DROPS)))
    out = _out_dir(args, cfg, "ablate")
    runs = run_ablation(cfg, drops, out_dir=out, reuse=args.reuse)
    summary = {label: {"drop": list(r.drop), "train": r.train_summary, **r.report.to_dict()}
               for label, r in runs.items()}
    rows = [{"variant": label, **row} for label, r in runs.items() for row in r.rows]
    write_csv(out / "ablation_episodes.csv", rows, ("variant",) + report.EVAL_COLUMNS)
    if len(runs) == 3:
        summary["ordering_2plus_nlos"] = ordering_holds(runs)
    report.write_json(out / "ablation.json", summary)
    report.plot_npl({k: v.report.to_dict() for k, v in runs.items()}, out / "ablation_npl.png")
    for label, r in runs.items():
        npl = r.report.category_npl("2+-NLOS")
        print(f"{label}: 2+-NLOS NPL {'n/a' if npl is None else f'{npl:.3f}'}")
    print(f"-> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Re-render figures from a finished train/eval/ablate directory."""
    run = Path(args.run_dir)
    if not run.is_dir():
        raise UsageError(f"not a directory: {run}")
    made = []
    if (run / "episodes.csv").exists():
        rows = [r for r in _read_rows(run / "episodes.csv")]
        made.append(report.plot_learning_curve(rows, run / "learning_curve.png"))
    if (run / "ablation.json").exists():
        import json
        data = json.loads((run / "ablation.json").read_text())
        reps = {k: v for k, v in data.items() if isinstance(v, dict) and "categories" in v}
        made.append(report.plot_npl(reps, run / "ablation_npl.png"))
    elif (run / "summary.json").exists():
        import json
        data = json.loads((run / "summary.json").read_text())
        if "categories" in data:
            made.append(report.plot_npl({data["policy"]: data}, run / "npl_by_category.png"))
    if not made:
        raise UsageError(f"nothing to plot in {run}")
    for p in made:
        print(p)
    return EXIT_OK


def _read_rows(path):
    import csv
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="piprl", description="Physics-informed navigation programs: parse, trace, train, evaluate.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seeded(sp):
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        return sp

    sp = seeded(sub.add_parser("parse", help="parse and validate a program, print it back"))
    sp.add_argument("program")
    sp.add_argument("-q", "--quiet", action="store_true", help="only report declarations")
    sp.set_defaults(func=cmd_parse)

    sp = seeded(sub.add_parser("trace-paths", help="print the ray paths reaching a receiver point"))
    sp.add_argument("map")
    sp.add_argument("x", type=float)
    sp.add_argument("y", type=float)
    sp.add_argument("--max-reflections", type=int, default=3)
    sp.add_argument("--max-paths", type=int, default=5)
    sp.set_defaults(func=cmd_trace)

    sp = seeded(sub.add_parser("train", help="sequential training over the config's tasks"))
    sp.add_argument("config")
    sp.add_argument("--policy", choices=("piprl", "nprl"), default="piprl")
    sp.add_argument("--drop", action="append", choices=sorted(DROPS), help="train an ablated program")
    sp.add_argument("--out", default=None)
    sp.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
    sp.set_defaults(func=cmd_train)

    sp = seeded(sub.add_parser("eval", help="NPL evaluation of a checkpoint or a baseline"))
    sp.add_argument("config")
    sp.add_argument("--policy", required=True, help="checkpoint path or one of: " + ", ".join(KINDS))
    sp.add_argument("--repeats", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_eval)

    sp = seeded(sub.add_parser("ablate", help="train and compare ablated programs"))
    sp.add_argument("config")
    sp.add_argument("--drop", action="append", choices=sorted(DROPS))
    sp.add_argument("--repeats", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--reuse", action="store_true", help="reuse checkpoints already in --out")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("report", help="re-render figures for a run directory")
    sp.add_argument("run_dir")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"piprl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, MapFormatError, ppo.CheckpointError, OSError, ValueError, RuntimeError) as exc:
        print(f"piprl: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
