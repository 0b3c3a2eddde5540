"""
Benchmark runner: seeded instances, one trial per (category, instance, instruction),
success-rate aggregation and the JSON / Markdown reports.
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

from kinoplan.actions import ActionSequence, canonical
from kinoplan.clients import HttpClient, MockOracleClient, RecordingClient, ReplayClient
from kinoplan.dataset import CATEGORIES, SEEN, UNSEEN, generate_instance, get_category, object_for_task
from kinoplan.errors import KinoplanError, LlmClientError, ReplayMiss, StageError
from kinoplan.kinematics import ArticulatedObject
from kinoplan.oracle import ManipulationTask, PlannerConfig, plan
from kinoplan.prompting import Demonstration, generate_demo_store, load_demo_store, plan_with_llm
from kinoplan.sim import SimConfig, TrialOutcome, TrialStatus, execute

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PLANNERS = ("oracle", "mock-llm", "replay", "live")

Planner = Callable[[ArticulatedObject, ManipulationTask], ActionSequence]


@dataclass(frozen=True)
class SuiteConfig:
    planner: str = "oracle"
    categories: tuple[str, ...] = tuple(CATEGORIES)
    trials_per_category: int = 3
    seed: int = 0
    workers: int = 1
    sim: SimConfig = field(default_factory=SimConfig)
    planning: PlannerConfig = field(default_factory=PlannerConfig)
    demos_dir: str | None = None
    replay_path: str | None = None
    llm_endpoint: str | None = None
    llm_model: str | None = None
    llm_rate_limit: float = 1.0

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"planner must be one of {PLANNERS}, got {self.planner!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        for name in self.categories:
            get_category(name)
        if self.trials_per_category < 1:
            raise ValueError("trials_per_category must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


def _pick(table: dict, cls, renames: dict[str, tuple[str, Callable]] | None = None) -> dict:
    renames = renames or {}
    known = {f.name for f in fields(cls)}
    out = {}
    for key, value in table.items():
        if key in renames:
            name, conv = renames[key]
            out[name] = conv(value)
        elif key in known:
            out[key] = value
        else:
            raise ValueError(f"unknown {cls.__name__} key {key!r}")
    return out


def load_config(path: str | Path) -> SuiteConfig:
    """Read a TOML suite config.

    Top-level keys mirror :class:`SuiteConfig`; ``[sim]`` holds simulator
    thresholds, ``[planning]`` planner steps (``arc_step_deg`` in degrees) and
    ``[llm]`` the endpoint, model, rate limit, replay file and demo directory.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    sim = SimConfig(**_pick(raw.pop("sim", {}), SimConfig))
    planning = PlannerConfig(
        **_pick(raw.pop("planning", {}), PlannerConfig, {"arc_step_deg": ("arc_step", math.radians)})
    )
    llm = raw.pop("llm", {})
    llm_keys = {
        "endpoint": "llm_endpoint",
        "model": "llm_model",
        "rate_limit": "llm_rate_limit",
        "replay": "replay_path",
        "demos": "demos_dir",
    }
    extra = {}
    for key, value in llm.items():
        if key not in llm_keys:
            raise ValueError(f"unknown [llm] key {key!r}")
        extra[llm_keys[key]] = value
    if "planner" in raw and not isinstance(raw["planner"], str):
        raise ValueError("planner must be a string")
    top = _pick(raw, SuiteConfig)
    return SuiteConfig(**top, **extra, sim=sim, planning=planning)


@dataclass(frozen=True)
class TrialResult:
    category: str
    instruction: str
    instance_seed: int
    outcome: TrialOutcome
    planner_id: str
    error: str | None = None
    infrastructure_error: bool = False

    def to_dict(self) -> dict:
        # planner_id stays out so reports from equivalent planners compare equal
        return {
            "category": self.category,
            "instruction": self.instruction,
            "instance_seed": self.instance_seed,
            "status": self.outcome.status.value,
            "achieved_delta": round(self.outcome.achieved_delta, 6),
            "steps_executed": self.outcome.steps_executed,
        }


def load_demos(config: SuiteConfig) -> list[Demonstration]:
    if config.demos_dir:
        return load_demo_store(config.demos_dir)
    return generate_demo_store(config=config.planning)


def make_client(config: SuiteConfig):
    """LLM client for an LLM-backed planner id; live clients record their exchanges."""
    if config.planner == "mock-llm":
        return MockOracleClient(config.planning)
    if config.planner == "replay":
        if not config.replay_path:
            raise ValueError("replay planner needs a transcript file (llm.replay / --replay)")
        return ReplayClient.load(config.replay_path)
    if config.planner == "live":
        if not (config.llm_endpoint and config.llm_model):
            raise ValueError("live planner needs llm.endpoint and llm.model")
        return RecordingClient(HttpClient(config.llm_endpoint, config.llm_model, config.llm_rate_limit))
    raise ValueError(f"planner {config.planner!r} does not use an LLM client")


def make_planner(config: SuiteConfig, demos: list[Demonstration] | None = None, client=None) -> Planner:
    """Planner callable for ``config.planner``; ``client`` overrides the LLM client."""
    if config.planner == "oracle":
        return lambda obj, task: plan(obj, task, config.planning)
    client = client if client is not None else make_client(config)
    demos = demos if demos is not None else load_demos(config)
    return lambda obj, task: plan_with_llm(client, obj, task, demos)


def _is_infrastructure(exc: Exception) -> bool:
    cause = exc.cause if isinstance(exc, StageError) else exc
    return isinstance(cause, (ReplayMiss, LlmClientError))


def run_trial(
    planner_id: str,
    obj: ArticulatedObject,
    task: ManipulationTask,
    config: SuiteConfig,
    planner: Planner,
    category: str | None = None,
    instance_seed: int = 0,
) -> TrialResult:
    """Plan, pass the plan through its canonical text, execute, judge."""
    posed = object_for_task(obj, task)
    error = None
    infra = False
    try:
        seq = canonical(planner(posed, task))
    except KinoplanError as exc:
        error, infra = f"{type(exc).__name__}: {exc}", _is_infrastructure(exc)
        outcome = TrialOutcome(TrialStatus.MALFORMED_PLAN, 0.0, 0)
    else:
        outcome = execute(posed, seq, task, config.sim)
    return TrialResult(category or obj.name, task.instruction, instance_seed, outcome, planner_id, error, infra)


@dataclass
class Cell:
    category: str
    instruction: str
    successes: int = 0
    trials: int = 0

    @property
    def asr(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "instruction": self.instruction,
            "successes": self.successes,
            "trials": self.trials,
            "asr": self.asr,
        }


@dataclass
class AsrReport:
    seed: int
    trials_per_category: int
    seen: list[Cell]
    unseen: list[Cell]
    results: list[TrialResult]
    planner_id: str = "oracle"

    @property
    def cells(self) -> list[Cell]:
        return self.seen + self.unseen

    @property
    def infrastructure_errors(self) -> int:
        return sum(r.infrastructure_error for r in self.results)

    def to_dict(self) -> dict:
        successes = sum(c.successes for c in self.cells)
        trials = sum(c.trials for c in self.cells)
        return {
            "seed": self.seed,
            "trials_per_category": self.trials_per_category,
            "seen": [c.to_dict() for c in self.seen],
            "unseen": [c.to_dict() for c in self.unseen],
            "totals": {"successes": successes, "trials": trials, "asr": successes / trials if trials else 0.0},
            "trials": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_markdown(self) -> str:
        return render_markdown(self)


def format_asr(asr: float) -> str:
    """Percentage truncated to one decimal, the way 2/3 reads as 66.6%."""
    tenths = math.floor(asr * 1000 + 1e-9) / 10
    return f"{int(tenths)}%" if tenths == int(tenths) else f"{tenths:.1f}%"


def _table(title: str, cells: list[Cell], label: str) -> list[str]:
    by_cat: dict[str, list[Cell]] = {}
    for c in cells:
        by_cat.setdefault(c.category, []).append(c)
    if not by_cat:
        return []
    cats = list(by_cat)
    lines = [f"## {title}", "", "| Method | " + " | ".join(cats) + " |", "|---" * (len(cats) + 1) + "|"]
    row = ["/ ".join(format_asr(c.asr) for c in by_cat[cat]) for cat in cats]
    lines.append(f"| {label} | " + " | ".join(row) + " |")
    return lines + [""]


def render_markdown(report: AsrReport) -> str:
    lines = _table("Seen categories with unseen instances and poses", report.seen, report.planner_id)
    lines += _table("Unseen categories", report.unseen, report.planner_id)
    lines.append(
        "Instructions of the same object are separated by `/` in the order: "
        + "; ".join(
            f"{cat}: {' / '.join(get_category(cat).instruction_names)}"
            for cat in dict.fromkeys(c.category for c in report.cells)
        )
    )
    return "\n".join(lines) + "\n"


def suite_trials(config: SuiteConfig) -> list[tuple[str, int, ArticulatedObject, ManipulationTask]]:
    order = [c for c in SEEN + UNSEEN if c in config.categories]
    jobs = []
    for cat in order:
        for i in range(config.trials_per_category):
            seed = config.seed + i
            obj, tasks = generate_instance(cat, seed)
            jobs.extend((cat, seed, obj, task) for task in tasks)
    return jobs


def run_suite(config: SuiteConfig, planner: Planner | None = None) -> AsrReport:
    planner = planner or make_planner(config)
    jobs = suite_trials(config)

    def one(job):
        cat, seed, obj, task = job
        return run_trial(config.planner, obj, task, config, planner, cat, seed)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(job) for job in jobs]
    return aggregate(config, results)


def aggregate(config: SuiteConfig, results: list[TrialResult]) -> AsrReport:
    cells: dict[tuple[str, str], Cell] = {}
    for cat in SEEN + UNSEEN:
        if cat in config.categories:
            for instruction in get_category(cat).instruction_names:
                cells[(cat, instruction)] = Cell(cat, instruction)
    for r in results:
        cell = cells[(r.category, r.instruction)]
        cell.trials += 1
        cell.successes += r.outcome.success
    ordered = sorted(results, key=lambda r: (list(cells).index((r.category, r.instruction)), r.instance_seed))
    return AsrReport(
        config.seed,
        config.trials_per_category,
        [c for (cat, _), c in cells.items() if get_category(cat).seen],
        [c for (cat, _), c in cells.items() if not get_category(cat).seen],
        ordered,
        config.planner,
    )


def write_report(report: AsrReport, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, md_path = out / "report.json", out / "report.md"
    json_path.write_text(report.to_json(), encoding="utf-8")
    md_path.write_text(report.to_markdown(), encoding="utf-8")
    return json_path, md_path


def with_planner(config: SuiteConfig, planner: str) -> SuiteConfig:
    return replace(config, planner=planner)
