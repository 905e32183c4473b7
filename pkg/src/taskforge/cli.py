"""Command-line surface: extract, seed, mutate, crossover, induce, run,
verify, metrics, export.

Exit codes: 0 success, 1 degraded completion (some slots exhausted),
2 fatal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from taskforge.engine import EvolutionEngine, RunConfig, read_corpus
from taskforge.gateway import (
    FixtureTransport,
    Gateway,
    HttpTransport,
    ROLES,
    SamplingParams,
)
from taskforge.model import TaskMode
from taskforge.sandbox import ExecLimits, HarnessExecutor, SandboxSupervisor
from taskforge.store import CurriculumStore

EXIT_OK = 0
EXIT_DEGRADED = 1
EXIT_FATAL = 2


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _sampling(raw: Optional[dict]) -> SamplingParams:
    if not raw:
        return SamplingParams()
    return SamplingParams(**raw)


def build_run_config(raw: dict) -> RunConfig:
    run = dict(raw.get("run", {}))
    if "modes" in run:
        run["modes"] = tuple(TaskMode(m) for m in run["modes"])
    if "banned_keywords" in run:
        run["banned_keywords"] = tuple(run["banned_keywords"])
    run["limits"] = ExecLimits(**raw.get("limits", {}))
    sampling = raw.get("sampling")
    if sampling:
        run["proposer_sampling"] = _sampling(sampling.get("proposer"))
        run["solver_sampling"] = _sampling(sampling.get("solver"))
    return RunConfig(**{k: v for k, v in run.items() if v is not None})


def build_gateway(args, raw: dict) -> Gateway:
    transport_cfg = raw.get("transport", {})
    if args.transport == "fixture":
        if not args.fixture_dir:
            raise SystemExit("--fixture-dir is required with --transport fixture")
        transports = {role: FixtureTransport(Path(args.fixture_dir) / role)
                      for role in ROLES}
    else:
        transports = {role: HttpTransport(role) for role in ROLES}
    return Gateway(
        transports,
        retry_budget=transport_cfg.get("retry_budget", 3),
        backoff_base=transport_cfg.get("backoff_base", 0.5),
        prices_per_1k=transport_cfg.get("prices_per_1k"),
        qps=transport_cfg.get("qps"),
    )


def build_supervisor(config: RunConfig, raw: dict) -> SandboxSupervisor:
    harness_cmd = raw.get("harness_command") or [sys.executable, "-m", "pyharness"]
    return SandboxSupervisor(
        HarnessExecutor(harness_cmd),
        limits=config.limits,
        banned_keywords=config.banned_keywords,
        pool_size=raw.get("sandbox_pool_size", 4),
    )


def build_engine(args) -> tuple[EvolutionEngine, CurriculumStore]:
    raw = _load_config(args.config)
    config = build_run_config(raw)
    gateway = build_gateway(args, raw)
    supervisor = build_supervisor(config, raw)
    store = CurriculumStore(Path(args.store))
    return EvolutionEngine(gateway, supervisor, store, config), store


def _finish(store: CurriculumStore) -> int:
    return EXIT_DEGRADED if store.state.exhausted_count else EXIT_OK


def cmd_extract(args) -> int:
    engine, store = build_engine(args)
    corpus = read_corpus(Path(args.corpus)) if args.corpus else None
    skills, attributes = engine.ensure_banks(corpus)
    print(f"skill bank: {len(skills)} entries")
    print(f"attribute bank: {len(attributes)} entries")
    return _finish(store)


def cmd_seed(args) -> int:
    engine, store = build_engine(args)
    engine.ensure_banks(None)
    mode = TaskMode(args.mode)
    if args.skill:
        if args.skill not in engine.skill_bank:
            raise SystemExit(f"unknown skill {args.skill!r}")
        engine.seed_skill(mode, args.skill)
    else:
        engine.seed_tasks(mode)
    print(f"accepted tasks: {store.state.accepted_count}")
    return _finish(store)


def cmd_mutate(args) -> int:
    engine, store = build_engine(args)
    engine.ensure_banks(None)
    parents = [t for t in store.state.tasks()
               if (args.parent is None or t.id == args.parent)]
    if args.parent and not parents:
        raise SystemExit(f"no stored task with id {args.parent!r}")
    for parent in parents:
        if parent.mode in (TaskMode.DEDUCTION, TaskMode.ABDUCTION):
            engine.mutate_cohort(parent)
    print(f"accepted tasks: {store.state.accepted_count}")
    return _finish(store)


def cmd_crossover(args) -> int:
    engine, store = build_engine(args)
    engine.ensure_banks(None)
    skills = [args.skill] if args.skill else engine.skill_bank.names()
    for mode in engine.config.modes:
        for skill in skills:
            engine.crossover(mode, skill)
    print(f"accepted tasks: {store.state.accepted_count}")
    return _finish(store)


def cmd_induce(args) -> int:
    engine, store = build_engine(args)
    engine.ensure_banks(None)
    sources = [t for t in store.state.tasks()
               if t.mode in (TaskMode.DEDUCTION, TaskMode.ABDUCTION)
               and (args.source is None or t.id == args.source)]
    for source in sources:
        engine.build_induction(source)
    print(f"accepted tasks: {store.state.accepted_count}")
    return _finish(store)


def cmd_run(args) -> int:
    engine, store = build_engine(args)
    corpus = read_corpus(Path(args.corpus)) if args.corpus else None
    tasks = engine.run_iteration(corpus)
    usage = engine.gateway.usage_report()
    print(f"accepted tasks: {len(tasks)}")
    print(f"proposals: {store.state.proposed_count}, "
          f"rejections: {store.state.rejected_count}, "
          f"discard rate: {store.discard_rate():.3f}")
    print(f"tokens: {usage.total.total_tokens}, cost: {usage.total.cost:.2f}")
    return _finish(store)


def cmd_verify(args) -> int:
    engine, store = build_engine(args)
    engine.ensure_banks(None)
    task = store.state.accepted.get(args.task)
    if task is None:
        raise SystemExit(f"no stored task with id {args.task!r}")
    _, report = engine.checker().evaluate(task)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.overall else EXIT_DEGRADED


def cmd_metrics(args) -> int:
    store = CurriculumStore(Path(args.store))
    support = None
    if args.full_support and store.state.skill_bank is not None:
        support = store.state.skill_bank.names()
    print(json.dumps(store.metrics(support), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_export(args) -> int:
    engine, store = build_engine(args)
    dedupe: Optional[set[str]] = None
    if args.dedupe_against:
        dedupe = set()
        for line in Path(args.dedupe_against).read_text(encoding="utf-8").splitlines():
            if line.strip():
                dedupe.add(json.loads(line)["id"])
    path = store.export_dataset(Path(args.dest), engine.gateway,
                                dedupe_against=dedupe)
    print(f"exported {path}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskforge",
        description="Evolutionary synthesis of executable code-reasoning tasks")
    parser.add_argument("--store", default="./runstore", help="journal directory")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--transport", choices=("live", "fixture"), default="live")
    parser.add_argument("--fixture-dir", default=None,
                        help="recorded completions for --transport fixture")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build skill/attribute banks")
    p.add_argument("--corpus", default=None, help="line-JSON problem/solution records")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("seed", help="skill-conditioned seeding")
    p.add_argument("--mode", choices=("deduction", "abduction"), required=True)
    p.add_argument("--skill", default=None)
    p.set_defaults(fn=cmd_seed)

    p = sub.add_parser("mutate", help="attribute-mutation cohorts")
    p.add_argument("--parent", default=None, help="parent task id")
    p.set_defaults(fn=cmd_mutate)

    p = sub.add_parser("crossover", help="novel skill combinations")
    p.add_argument("--skill", default=None)
    p.set_defaults(fn=cmd_crossover)

    p = sub.add_parser("induce", help="induction tasks from stored programs")
    p.add_argument("--source", default=None, help="source task id")
    p.set_defaults(fn=cmd_induce)

    p = sub.add_parser("run", help="full iteration: all phases")
    p.add_argument("--corpus", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="re-check a stored task")
    p.add_argument("--task", required=True)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("metrics", help="diversity/difficulty metrics")
    p.add_argument("--full-support", action="store_true",
                   help="measure the CDF over the whole skill bank")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("export", help="write the dataset as line-JSON")
    p.add_argument("--dest", required=True)
    p.add_argument("--dedupe-against", default=None,
                   help="previous export to dedupe task ids against")
    p.set_defaults(fn=cmd_export)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
