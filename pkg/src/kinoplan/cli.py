"""Command line entry point: ``kinoplan <command> ...``.

Exit codes: 0 success, 1 infrastructure error (I/O, LLM client, replay miss),
2 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from kinoplan.actions import canonical, emit_actions, parse_actions
from kinoplan.clients import RecordingClient
from kinoplan.dataset import CATEGORIES, generate_instance, instruction_slug, object_for_task
from kinoplan.description import parse_description, serialize_description
from kinoplan.errors import KinoplanError, ParseError, SchemaError
from kinoplan.harness import (
    PLANNERS,
    SuiteConfig,
    load_config,
    load_demos,
    make_client,
    make_planner,
    run_suite,
    write_report,
)
from kinoplan.oracle import ManipulationTask
from kinoplan.prompting import PipelineTrace, generate_demo_store, plan_with_llm
from kinoplan.sim import TrialOutcome, TrialStatus, execute, write_trace

log = logging.getLogger("kinoplan")

MANIFEST = "tasks.json"


class UsageError(Exception):
    pass


def _cmd_gen_dataset(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    categories = args.categories or list(CATEGORIES)
    manifest = []
    for cat in categories:
        if cat not in CATEGORIES:
            raise UsageError(f"unknown category {cat!r}")
        for i in range(args.instances):
            seed = args.seed + i
            obj, tasks = generate_instance(cat, seed)
            for task in tasks:
                name = f"{cat}_{seed}_{instruction_slug(task.instruction)}.kin.xml"
                (out / name).write_text(serialize_description(object_for_task(obj, task)).text, encoding="utf-8")
                manifest.append(
                    {
                        "object": name,
                        "category": cat,
                        "instance_seed": seed,
                        "instruction": task.instruction,
                        "delta": task.delta,
                        "push": task.push,
                    }
                )
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(manifest)} objects to {out}")
    return 0


def _cmd_demos(args) -> int:
    demos = generate_demo_store(seed=args.seed, out_dir=args.out)
    print(f"wrote {len(demos)} demonstrations to {args.out}")
    return 0


def _load_object(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read object file: {exc}") from None
    try:
        return parse_description(text)
    except (ParseError, SchemaError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _resolve_task(object_path: str, instruction: str | None, delta: float | None, push: bool) -> ManipulationTask:
    if delta is not None:
        if not instruction:
            raise UsageError("--delta needs --instruction")
        return ManipulationTask(instruction, delta, push)
    manifest = Path(object_path).with_name(MANIFEST)
    if not manifest.exists():
        raise UsageError(f"no --delta given and no {MANIFEST} next to {object_path}")
    name = Path(object_path).name
    for entry in json.loads(manifest.read_text(encoding="utf-8")):
        if entry["object"] == name and (instruction is None or entry["instruction"] == instruction):
            return ManipulationTask(entry["instruction"], entry["delta"], entry["push"])
    raise UsageError(f"{name} / {instruction!r} not found in {manifest}")


def _suite_config(args) -> SuiteConfig:
    config = load_config(args.config) if getattr(args, "config", None) else SuiteConfig()
    overrides = {}
    for key in ("planner", "seed", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "replay", None):
        overrides["replay_path"] = args.replay
    if getattr(args, "demos", None):
        overrides["demos_dir"] = args.demos
    return replace(config, **overrides)


def _cmd_plan(args) -> int:
    obj = _load_object(args.object)
    task = _resolve_task(args.object, args.instruction, args.delta, args.push)
    config = _suite_config(args)
    if config.planner == "oracle":
        seq = make_planner(config)(obj, task)
    else:
        client = make_client(config)
        if args.record and not isinstance(client, RecordingClient):
            client = RecordingClient(client)
        trace = PipelineTrace()
        try:
            seq = plan_with_llm(client, obj, task, load_demos(config), trace)
        finally:
            if args.dump_prompts:
                _dump_prompts(trace, args.dump_prompts)
            if isinstance(client, RecordingClient) and args.record:
                client.save(args.record)
    sys.stdout.write(emit_actions(canonical(seq)) + "\n")
    return 0


def _dump_prompts(trace: PipelineTrace, directory: str) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    for ex in trace.exchanges:
        n = counts[ex.stage] = counts.get(ex.stage, 0) + 1
        (out / f"{ex.stage}_attempt{n}_prompt.txt").write_text(ex.prompt, encoding="utf-8")
        (out / f"{ex.stage}_attempt{n}_response.txt").write_text(ex.response, encoding="utf-8")


def _cmd_simulate(args) -> int:
    obj = _load_object(args.object)
    task = _resolve_task(args.object, args.instruction, args.delta, args.push)
    try:
        plan_text = Path(args.plan).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read plan file: {exc}") from None
    records: list[dict] | None = [] if args.trace else None
    try:
        seq = parse_actions(plan_text)
    except KinoplanError:
        outcome = TrialOutcome(TrialStatus.MALFORMED_PLAN, 0.0, 0)
    else:
        outcome = execute(obj, seq, task, trace=records)
    if args.trace:
        write_trace(args.trace, records or [])
    sys.stdout.write(json.dumps(outcome.to_dict()) + "\n")
    return 0


def _cmd_eval(args) -> int:
    config = _suite_config(args)
    recorder = None
    if config.planner == "live" or (args.record and config.planner != "oracle"):
        recorder = make_client(config)
        if not isinstance(recorder, RecordingClient):
            recorder = RecordingClient(recorder)
    planner = make_planner(config, client=recorder)
    report = run_suite(config, planner)
    write_report(report, args.out)
    (Path(args.out) / "run.json").write_text(
        json.dumps({"planner": config.planner, "seed": config.seed, "categories": list(config.categories),
                    "trials_per_category": config.trials_per_category}, indent=2) + "\n",
        encoding="utf-8",
    )
    if recorder is not None:
        recorder.save(args.record or Path(args.out) / "transcripts.json")
    sys.stdout.write(report.to_markdown())
    if report.infrastructure_errors:
        log.error("%d trial(s) hit infrastructure errors", report.infrastructure_errors)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinoplan", description="Kinematic-aware manipulation planning toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="write seeded benchmark objects and a task manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=3, help="instances per category")
    p.add_argument("--categories", nargs="*")
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("demos", help="demonstration store")
    demos_sub = p.add_subparsers(dest="demos_command", required=True)
    g = demos_sub.add_parser("generate", help="write the 17 demonstrations")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=1000)
    g.set_defaults(func=_cmd_demos)

    p = sub.add_parser("plan", help="plan one task and print the action program")
    p.add_argument("--object", required=True)
    p.add_argument("--instruction")
    p.add_argument("--delta", type=float, help="commanded joint displacement (else read from tasks.json)")
    p.add_argument("--push", action="store_true")
    p.add_argument("--planner", choices=PLANNERS, default="oracle")
    p.add_argument("--config")
    p.add_argument("--demos", help="demonstration directory (default: generated in memory)")
    p.add_argument("--replay", help="transcript file for the replay planner")
    p.add_argument("--record", help="save LLM transcripts here for later replay")
    p.add_argument("--dump-prompts", metavar="DIR")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("simulate", help="execute an action program and print the outcome")
    p.add_argument("--object", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--trace")
    p.add_argument("--instruction")
    p.add_argument("--delta", type=float)
    p.add_argument("--push", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("eval", help="run the benchmark suite")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--planner", choices=PLANNERS)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--replay")
    p.add_argument("--demos")
    p.add_argument("--record", help="save LLM transcripts here (live runs default to OUT/transcripts.json)")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"kinoplan: error: {exc}", file=sys.stderr)
        return 2
    except (KinoplanError, OSError) as exc:
        log.error("%s", exc)
        return 1

if __name__ == "__main__":
    sys.exit(main())
