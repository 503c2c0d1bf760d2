"""The iterative optimization state machine.

One pipeline run drives Planner -> Coder -> Compiler -> execute/profile for
R rounds, with a Debugger sub-loop of up to D attempts whenever a candidate
fails validity.  The best valid candidate (strict score improvement) is
retained; rejected strategies feed back to the Planner as the
"All error plan:" context.  Every candidate's artifacts persist under the
run directory, and a state checkpoint after each round supports resume.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agents import (
    AgentClient,
    AgentError,
    AgentRole,
    ChatExchange,
    TransportExhausted,
    accumulate_usage,
    build_code_write,
    command_argv,
    extract_compile_command,
)
from .evaluation import Score, check_valid, weighted_score
from .profiling import FilteredProfile, ThresholdSet, render_profile_context
from .tasks import TaskManifest
from .toolchain import (
    Outcome,
    execute_and_filter,
    render_size_results,
    splice_optimization_segment,
)

logger = logging.getLogger(__name__)

SCHEME_ACCEPTED = "accepted"
SCHEME_REJECTED = "rejected"

BASELINE_SCHEME = "Baseline"


class BaselineInvalid(Exception):
    def __init__(self, task: str, failure_log: str):
        self.task = task
        self.failure_log = failure_log
        super().__init__(f"baseline for task {task!r} is invalid: {failure_log[:500]}")


@dataclass(frozen=True)
class PipelineConfig:
    rounds: int = 3
    debug_rounds: int = 3
    profile_mode: str = "filtered"  # filtered | none | full
    thresholds: ThresholdSet = field(default_factory=ThresholdSet.default)
    model: str = "mock-model"
    seed: int = 0
    run_timeout: float = 300.0

    def __post_init__(self):
        if self.rounds < 0 or self.debug_rounds < 0:
            raise ValueError("rounds and debug_rounds must be >= 0")
        if self.profile_mode not in ("filtered", "none", "full"):
            raise ValueError(f"unknown profile mode {self.profile_mode!r}")


@dataclass(frozen=True)
class SchemeEntry:
    scheme_text: str
    status: str  # accepted | rejected


@dataclass
class Candidate:
    index: int
    debug_attempt: int | None
    scheme_text: str
    code: str | None
    assembled: str | None
    compile_command: list[str] | None
    wrapper_name: str | None
    outcome: Outcome
    score: Score | None

    @property
    def tag(self) -> str:
        if self.debug_attempt is None:
            return f"candidate-{self.index}"
        return f"candidate-{self.index}.debug-{self.debug_attempt}"

    @property
    def valid(self) -> bool:
        return self.score is not None and self.score.valid


@dataclass
class RunState:
    task: str
    best_code: str
    best_command: list[str]
    best_score: float
    best_outcome: Outcome
    baseline_outcome: Outcome
    ledger: list[SchemeEntry] = field(default_factory=list)
    completed_rounds: int = 0
    exchanges: list[ChatExchange] = field(default_factory=list)
    candidates: list[Candidate] = field(default_factory=list)

    @property
    def usage(self):
        return accumulate_usage(self.exchanges)

    def role_calls(self) -> dict[str, int]:
        counts = {role.value: 0 for role in AgentRole}
        for exc in self.exchanges:
            counts[exc.role.value] += 1
        return counts


def format_former_plan(ledger: list[SchemeEntry]) -> str:
    """Planner context: accepted strategies first, every rejected strategy
    folded under one "All error plan:" prefix; the implicit initial entry is
    the baseline."""
    if not ledger:
        return BASELINE_SCHEME
    accepted = [e.scheme_text for e in ledger if e.status == SCHEME_ACCEPTED]
    rejected = [e.scheme_text for e in ledger if e.status == SCHEME_REJECTED]
    parts: list[str] = []
    parts.extend(accepted)
    if rejected:
        parts.append("All error plan: " + "; ".join(rejected))
    if not parts:
        return BASELINE_SCHEME
    return "\n".join(parts)


def render_result_log(outcome: Outcome, profile_mode: str) -> str:
    """The {result_log} binding: harness blocks plus the profiling context
    for the configured mode."""
    blocks = render_size_results(list(outcome.size_results))
    context = render_profile_context(
        list(outcome.filtered_profiles), profile_mode, list(outcome.raw_profiles)
    )
    if context:
        return blocks + "\n" + context
    return blocks


# ---------------------------------------------------------------------------
# Persistence


def _usage_snapshot(state: RunState) -> dict:
    return state.usage.to_dict()


def _checkpoint_path(task_dir: Path) -> Path:
    return task_dir / "state.json"


def save_checkpoint(task_dir: Path, state: RunState) -> None:
    task_dir.mkdir(parents=True, exist_ok=True)
    (task_dir / "best.cu").write_text(state.best_code, encoding="utf-8")
    payload = {
        "task": state.task,
        "completed_rounds": state.completed_rounds,
        "best_score": state.best_score,
        "best_command": state.best_command,
        "best_outcome": state.best_outcome.to_dict(),
        "baseline_outcome": state.baseline_outcome.to_dict(),
        "ledger": [
            {"scheme_text": e.scheme_text, "status": e.status} for e in state.ledger
        ],
        "role_calls": state.role_calls(),
        "exchanges": [
            {
                "role": e.role.value,
                "prompt_tokens": e.prompt_tokens,
                "completion_tokens": e.completion_tokens,
                "cost_usd": e.cost_usd,
                "attempt": e.attempt,
            }
            for e in state.exchanges
        ],
        "usage": _usage_snapshot(state),
    }
    _checkpoint_path(task_dir).write_text(
        json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_checkpoint(task_dir: Path) -> RunState | None:
    path = _checkpoint_path(task_dir)
    if not path.exists():
        return None
    data = json.loads(path.read_text(encoding="utf-8"))
    exchanges = [
        ChatExchange(
            role=AgentRole(e["role"]),
            system_text="",
            user_text="",
            response_text="",
            prompt_tokens=e["prompt_tokens"],
            completion_tokens=e["completion_tokens"],
            cost_usd=e["cost_usd"],
            attempt=e["attempt"],
        )
        for e in data["exchanges"]
    ]
    return RunState(
        task=data["task"],
        best_code=(task_dir / "best.cu").read_text(encoding="utf-8"),
        best_command=list(data["best_command"]),
        best_score=data["best_score"],
        best_outcome=Outcome.from_dict(data["best_outcome"]),
        baseline_outcome=Outcome.from_dict(data["baseline_outcome"]),
        ledger=[SchemeEntry(e["scheme_text"], e["status"]) for e in data["ledger"]],
        completed_rounds=data["completed_rounds"],
        exchanges=exchanges,
    )


def _persist_candidate(task_dir: Path, task: TaskManifest, cand: Candidate) -> None:
    cdir = task_dir / cand.tag
    cdir.mkdir(parents=True, exist_ok=True)
    if cand.code is not None:
        (cdir / "optimized.cu").write_text(cand.code, encoding="utf-8")
    if cand.assembled is not None:
        (cdir / Path(task.harness_source).name).write_text(
            cand.assembled, encoding="utf-8"
        )
    if cand.compile_command is not None:
        (cdir / "command.json").write_text(
            json.dumps(cand.compile_command), encoding="utf-8"
        )
    record = {
        "scheme_text": cand.scheme_text,
        "wrapper_name": cand.wrapper_name,
        "valid": cand.valid,
        "score": cand.score.P if cand.score else None,
        "outcome": cand.outcome.to_dict(),
    }
    (cdir / "outcome.json").write_text(
        json.dumps(record, indent=2, sort_keys=True), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Candidate attempts


def _invalid_candidate(
    index: int, debug_attempt: int | None, scheme: str, failure_log: str, code=None
) -> Candidate:
    return Candidate(
        index=index,
        debug_attempt=debug_attempt,
        scheme_text=scheme,
        code=code,
        assembled=None,
        compile_command=None,
        wrapper_name=None,
        outcome=Outcome(compiled=False, ran=False, correct=False, failure_log=failure_log),
        score=None,
    )


def _attempt_candidate(
    index: int,
    debug_attempt: int | None,
    instructions: str,
    scheme: str,
    base_code: str,
    task: TaskManifest,
    config: PipelineConfig,
    agents: AgentClient,
    backend,
    task_dir: Path,
    state: RunState,
) -> Candidate:
    """One Coder -> Compiler -> execute/profile attempt.

    Agent responses that fail extraction become invalid candidates (they
    enter the debug loop like any other failure) rather than aborting.
    """
    tag = (
        f"candidate-{index}"
        if debug_attempt is None
        else f"candidate-{index}.debug-{debug_attempt}"
    )
    dst_rel = f"{tag}/optimized.cu"
    coder_exchange, coder_response = agents.run(
        AgentRole.CODER,
        {
            "code_file_content": base_code,
            "instructions": instructions,
            "dst_file_name": dst_rel,
        },
    )
    state.exchanges.append(coder_exchange)
    try:
        write = build_code_write(coder_response, dst_rel)
    except AgentError as exc:
        cand = _invalid_candidate(
            index, debug_attempt, scheme, f"coder output rejected: {exc}"
        )
        _persist_candidate(task_dir, task, cand)
        return cand

    harness_text = task.harness_path.read_text(encoding="utf-8")
    assembled = splice_optimization_segment(harness_text, write.content)

    compiler_exchange, _ = agents.run(
        AgentRole.COMPILER,
        {
            "code_file_content": assembled,
            "origin_command": task.baseline_compile_command,
        },
    )
    state.exchanges.append(compiler_exchange)
    try:
        command = extract_compile_command(compiler_exchange.response_text)
    except AgentError as exc:
        cand = _invalid_candidate(
            index,
            debug_attempt,
            scheme,
            f"compiler output rejected: {exc}",
            code=write.content,
        )
        cand.assembled = assembled
        cand.wrapper_name = write.wrapper_name
        _persist_candidate(task_dir, task, cand)
        return cand

    argv = command_argv(command)
    workdir = task_dir / tag
    outcome = execute_and_filter(
        write.content,
        argv,
        task,
        backend,
        workdir,
        config.thresholds,
        config.profile_mode,
        run_timeout=config.run_timeout,
        save_exports_to=workdir,
    )
    valid = check_valid(outcome, task.size_labels)
    score = (
        Score(P=weighted_score(outcome.size_results), valid=True, per_size=outcome.size_results)
        if valid
        else None
    )
    cand = Candidate(
        index=index,
        debug_attempt=debug_attempt,
        scheme_text=scheme,
        code=write.content,
        assembled=assembled,
        compile_command=argv,
        wrapper_name=write.wrapper_name,
        outcome=outcome,
        score=score,
    )
    _persist_candidate(task_dir, task, cand)
    return cand


def debug_loop(
    failing: Candidate,
    index: int,
    scheme: str,
    task: TaskManifest,
    config: PipelineConfig,
    agents: AgentClient,
    backend,
    task_dir: Path,
    state: RunState,
) -> Candidate:
    """Up to D Debugger -> Coder -> Compiler -> execute attempts, breaking on
    the first valid outcome; returns the last attempt either way.

    Each Debugger call sees the freshest failing test program and its error
    log; the Coder then revises that candidate's code.
    """
    harness_text = task.harness_path.read_text(encoding="utf-8")
    for attempt in range(1, config.debug_rounds + 1):
        failing_program = (
            failing.assembled if failing.assembled is not None else harness_text
        )
        debug_exchange, _ = agents.run(
            AgentRole.DEBUGGER,
            {
                "kernel_name": task.wrapper_name,
                "description": task.description,
                "code_file_content": failing_program,
                "result_log": failing.outcome.failure_log,
            },
        )
        state.exchanges.append(debug_exchange)
        debug_scheme = debug_exchange.response_text.strip()
        base_code = failing.code if failing.code is not None else ""
        candidate = _attempt_candidate(
            index,
            attempt,
            debug_scheme,
            scheme,
            base_code,
            task,
            config,
            agents,
            backend,
            task_dir,
            state,
        )
        if candidate.valid:
            return candidate
        failing = candidate
    return failing


def run_pipeline(
    task: TaskManifest,
    config: PipelineConfig,
    agents: AgentClient,
    backend,
    run_dir: Path,
    resume: bool = False,
) -> RunState:
    """Execute the full optimization loop for one task.

    The baseline must compile and run correctly first; its profile seeds the
    Planner context.  Returns the final RunState whose best code is always a
    valid program and whose best score never drops below the baseline's 1.0.
    """
    run_dir = Path(run_dir)
    task_dir = run_dir / task.name
    task_dir.mkdir(parents=True, exist_ok=True)

    state: RunState | None = None
    if resume:
        state = load_checkpoint(task_dir)
        if state is not None:
            for role, count in state.role_calls().items():
                if hasattr(agents.transport, "skip"):
                    agents.transport.skip(role, count)

    if state is None:
        baseline_argv = task.baseline_compile_command.split()
        baseline_outcome = execute_and_filter(
            None,
            baseline_argv,
            task,
            backend,
            task_dir / "baseline",
            config.thresholds,
            config.profile_mode,
            run_timeout=config.run_timeout,
            save_exports_to=task_dir / "baseline",
        )
        if not check_valid(baseline_outcome, task.size_labels):
            raise BaselineInvalid(task.name, baseline_outcome.failure_log)
        state = RunState(
            task=task.name,
            best_code=task.baseline_path.read_text(encoding="utf-8"),
            best_command=baseline_argv,
            best_score=1.0,
            best_outcome=baseline_outcome,
            baseline_outcome=baseline_outcome,
            completed_rounds=0,
        )
        save_checkpoint(task_dir, state)

    for round_index in range(state.completed_rounds + 1, config.rounds + 1):
        former_plan = format_former_plan(state.ledger)
        result_log = render_result_log(state.best_outcome, config.profile_mode)
        try:
            planner_exchange, _ = agents.run(
                AgentRole.PLANNER,
                {
                    "code_file_content": state.best_code,
                    "description": task.description,
                    "result_log": result_log,
                    "former_plan": former_plan,
                },
            )
        except TransportExhausted:
            save_checkpoint(task_dir, state)
            raise
        state.exchanges.append(planner_exchange)
        scheme = planner_exchange.response_text.strip()

        try:
            candidate = _attempt_candidate(
                round_index,
                None,
                scheme,
                scheme,
                state.best_code,
                task,
                config,
                agents,
                backend,
                task_dir,
                state,
            )
            if not candidate.valid and config.debug_rounds >= 1:
                candidate = debug_loop(
                    candidate,
                    round_index,
                    scheme,
                    task,
                    config,
                    agents,
                    backend,
                    task_dir,
                    state,
                )
        except TransportExhausted:
            save_checkpoint(task_dir, state)
            raise
        state.candidates.append(candidate)

        if candidate.valid and candidate.score.P > state.best_score:
            state.best_code = candidate.code
            state.best_command = list(candidate.compile_command)
            state.best_score = candidate.score.P
            state.best_outcome = candidate.outcome
            state.ledger.append(SchemeEntry(scheme, SCHEME_ACCEPTED))
        else:
            state.ledger.append(SchemeEntry(scheme, SCHEME_REJECTED))
        state.completed_rounds = round_index
        save_checkpoint(task_dir, state)

    return state


# ---------------------------------------------------------------------------
# Suite runs


@dataclass(frozen=True)
class TaskFailure:
    task: str
    error: str


@dataclass
class SuiteResult:
    states: list[RunState]
    failures: list[TaskFailure]


def _pick_primary_profile(outcome: Outcome) -> FilteredProfile | None:
    """Per-task classification uses the largest-complexity size's profile."""
    if not outcome.filtered_profiles:
        return None
    by_label = {fp.size_label: fp for fp in outcome.filtered_profiles}
    if not outcome.size_results:
        return outcome.filtered_profiles[-1]
    largest = max(outcome.size_results, key=lambda r: r.complexity)
    return by_label.get(largest.size_label, outcome.filtered_profiles[-1])


def run_suite(
    tasks: list[TaskManifest],
    config: PipelineConfig,
    agents_factory,
    backend,
    run_dir: Path,
    workers: int = 1,
    resume: bool = False,
) -> SuiteResult:
    """Run the pipeline over every task with bounded parallelism.

    ``agents_factory(task)`` builds an isolated AgentClient per task so the
    suites stay deterministic under concurrency.  Per-task failures are
    recorded, not propagated; results aggregate in task-name order.
    """
    run_dir = Path(run_dir)
    states: dict[str, RunState] = {}
    failures: dict[str, TaskFailure] = {}

    def _one(task: TaskManifest):
        try:
            state = run_pipeline(
                task, config, agents_factory(task), backend, run_dir, resume=resume
            )
            return task.name, state, None
        except Exception as exc:  # isolate per-task failures
            logger.warning("task %s failed: %s", task.name, exc)
            return task.name, None, TaskFailure(task.name, str(exc))

    if workers <= 1:
        outcomes = [_one(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one, tasks))
    for name, state, failure in outcomes:
        if state is not None:
            states[name] = state
        else:
            failures[name] = failure

    ordered_states = [states[name] for name in sorted(states)]
    ordered_failures = [failures[name] for name in sorted(failures)]
    return SuiteResult(states=ordered_states, failures=ordered_failures)


def write_task_result(run_dir: Path, task: TaskManifest, state: RunState) -> Path:
    """One machine-readable results file per completed task run."""
    before = _pick_primary_profile(state.baseline_outcome)
    after = _pick_primary_profile(state.best_outcome)
    payload = {
        "task": task.name,
        "category": task.category,
        "precision": task.precision.value,
        "valid": True,
        "best_score": state.best_score,
        "per_size": [
            {"size_label": r.size_label, "complexity": r.complexity, "speedup": r.speedup}
            for r in state.best_outcome.size_results
        ],
        "before_class": before.bottleneck.name if before else None,
        "after_class": after.bottleneck.name if after else None,
        "before_metrics": dict(before.kept_metrics) if before else None,
        "after_metrics": dict(after.kept_metrics) if after else None,
        "ledger": [
            {"scheme_text": e.scheme_text, "status": e.status} for e in state.ledger
        ],
        "rounds_completed": state.completed_rounds,
        "usage": state.usage.to_dict(),
    }
    path = Path(run_dir) / task.name / "result.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path
