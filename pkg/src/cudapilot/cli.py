"""Command-line surface: calibration, classification, single-task
optimization, suite runs and report generation."""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import click

from .agents import AgentClient, ChatSettings
from .config import AppConfig, apply_overrides, load_config
from .evaluation import NoRuns, check_valid, weighted_score
from .pipeline import (
    BaselineInvalid,
    PipelineConfig,
    run_pipeline,
    run_suite,
    write_task_result,
)
from .profiling import (
    DegenerateDistribution,
    ThresholdSet,
    calibrate,
    classify,
    filter_metrics,
    parse_profiler_export,
    read_thresholds,
    write_thresholds,
)
from .reporting import DEFAULT_TAUS, build_suite_report, write_suite_report
from .tasks import EmptySuite, ManifestError, enumerate_suite, load_manifest
from .toolchain import CudaBackend, MockBackend, execute_and_filter
from .transport import HttpTransport, ScriptedTransport


def _build_backend(config: AppConfig):
    if config.backend == "mock":
        return MockBackend(seed=config.seed)
    if shutil.which("nvcc") is None:
        raise click.ClickException(
            "backend=cuda requires nvcc on PATH; use --backend mock otherwise"
        )
    return CudaBackend(
        compile_timeout=config.compile_timeout, run_timeout=config.run_timeout
    )


def _load_script(script_path: str | None) -> dict | None:
    if script_path is None:
        return None
    with open(script_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _agents_for(config: AppConfig, script: dict | None, task_name: str) -> AgentClient:
    settings = ChatSettings(
        model=config.model,
        temperature=config.temperature,
        max_retries=config.max_retries,
        backoff_base=config.backoff_base,
        pricing=config.pricing_for(config.model),
    )
    if script is not None:
        per_task = (script.get("tasks") or {}).get(task_name)
        spec = per_task if per_task is not None else script
        transport = ScriptedTransport(spec)
    else:
        transport = HttpTransport(config.endpoint, config.credential_env)
    return AgentClient(transport, settings, config.hardware_info)


def _thresholds_for(config: AppConfig) -> ThresholdSet:
    path = Path(config.run_dir) / "thresholds.toml"
    if path.exists():
        return read_thresholds(path)
    return ThresholdSet.default()


def _pipeline_config(config: AppConfig) -> PipelineConfig:
    return PipelineConfig(
        rounds=config.rounds,
        debug_rounds=config.debug_rounds,
        profile_mode=config.profile_mode,
        thresholds=_thresholds_for(config),
        model=config.model,
        seed=config.seed,
        run_timeout=config.run_timeout,
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML configuration file.")
@click.option("--backend", type=click.Choice(["mock", "cuda"]), default=None,
              help="Execution backend (mock needs no GPU).")
@click.option("--model", default=None, help="Chat model identifier.")
@click.option("--rounds", type=int, default=None, help="Optimization rounds R.")
@click.option("--debug-rounds", type=int, default=None,
              help="Debug attempts per candidate D.")
@click.option("--profile-mode", type=click.Choice(["filtered", "none", "full"]),
              default=None, help="Profiling context handed to the planner.")
@click.option("--workers", type=int, default=None,
              help="Concurrent tasks in suite runs.")
@click.option("--seed", type=int, default=None, help="Deterministic seed.")
@click.option("--resume", is_flag=True, default=False,
              help="Resume from the latest checkpoint in the run directory.")
@click.option("--script", "script_path", type=click.Path(exists=True), default=None,
              help="JSON file of canned agent responses (offline runs).")
@click.option("--run-dir", default=None, help="Run/artifact directory.")
@click.pass_context
def main(ctx, config_path, backend, model, rounds, debug_rounds, profile_mode,
         workers, seed, resume, script_path, run_dir):
    """Agent-driven CUDA kernel optimization loop."""
    config = load_config(config_path)
    config = apply_overrides(
        config,
        backend=backend,
        model=model,
        rounds=rounds,
        debug_rounds=debug_rounds,
        profile_mode=profile_mode,
        workers=workers,
        seed=seed,
        run_dir=run_dir,
    )
    ctx.obj = {
        "config": config,
        "resume": resume,
        "script": _load_script(script_path),
    }


@main.command("calibrate")
@click.argument("suite_dir", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.pass_context
def calibrate_cmd(ctx, suite_dir, out_path):
    """Profile every task's baseline and fit classification thresholds."""
    config: AppConfig = ctx.obj["config"]
    backend = _build_backend(config)
    try:
        listing = enumerate_suite(suite_dir)
    except EmptySuite as exc:
        raise click.ClickException(str(exc))
    for problem in listing.problems:
        click.echo(f"warning: skipped invalid manifest {problem.path}: {problem.message}",
                   err=True)
    reports = []
    work_root = Path(config.run_dir) / "calibration"
    for task in listing.tasks:
        outcome = execute_and_filter(
            None,
            task.baseline_compile_command.split(),
            task,
            backend,
            work_root / task.name,
            ThresholdSet.default(),
            profile_mode="filtered",
            run_timeout=config.run_timeout,
        )
        if not outcome.raw_profiles:
            raise click.ClickException(
                f"task {task.name}: baseline produced no profile "
                f"({outcome.failure_log[:200]})"
            )
        largest = max(task.sizes, key=lambda s: s.complexity)
        chosen = next(
            (r for r in outcome.raw_profiles if r.size_label == largest.label),
            outcome.raw_profiles[-1],
        )
        reports.append(chosen)
    try:
        thresholds = calibrate(reports, corpus_id=Path(suite_dir).name)
    except DegenerateDistribution as exc:
        raise click.ClickException(str(exc))
    write_thresholds(thresholds, out_path)
    click.echo(
        f"thresholds: compute={thresholds.compute_t:.4f} "
        f"dram={thresholds.dram_t:.4f} mem={thresholds.mem_t:.4f} "
        f"({thresholds.provenance}) -> {out_path}"
    )


@main.command("classify")
@click.argument("export_path", type=click.Path(exists=True))
@click.option("--thresholds", "thresholds_path", type=click.Path(exists=True),
              default=None, help="Thresholds file; defaults to 30/30/30.")
@click.pass_context
def classify_cmd(ctx, export_path, thresholds_path):
    """Classify every kernel launch in a profiler export."""
    thresholds = (
        read_thresholds(thresholds_path)
        if thresholds_path
        else _thresholds_for(ctx.obj["config"])
    )
    text = Path(export_path).read_text(encoding="utf-8")
    for report in parse_profiler_export(text):
        bottleneck = classify(report, thresholds)
        filtered = filter_metrics(report, bottleneck)
        click.echo(f"{report.kernel_name}: {bottleneck.value}")
        for canonical, value in filtered.kept_metrics.items():
            click.echo(f"  {canonical} = {value}")


@main.command()
@click.argument("task_dir", type=click.Path(exists=True))
@click.pass_context
def optimize(ctx, task_dir):
    """Run the full optimization loop on one task."""
    config: AppConfig = ctx.obj["config"]
    try:
        task = load_manifest(task_dir)
    except ManifestError as exc:
        raise click.ClickException(str(exc))
    backend = _build_backend(config)
    agents = _agents_for(config, ctx.obj["script"], task.name)
    try:
        state = run_pipeline(
            task,
            _pipeline_config(config),
            agents,
            backend,
            Path(config.run_dir),
            resume=ctx.obj["resume"],
        )
    except BaselineInvalid as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(1)
    write_task_result(Path(config.run_dir), task, state)
    usage = state.usage
    click.echo(f"task: {task.name}")
    click.echo(f"best score P = {state.best_score}")
    click.echo(f"rounds completed: {state.completed_rounds}")
    click.echo(f"total tokens: {usage.total_tokens}")
    click.echo(f"total cost: ${usage.total_cost_usd:.6f}")
    sys.exit(0 if state.best_score > 1.0 else 2)


@main.command()
@click.argument("task_dir", type=click.Path(exists=True))
@click.option("--candidate", "candidate_path", type=click.Path(exists=True),
              default=None,
              help="Score this optimized implementation instead of the baseline copy.")
@click.pass_context
def evaluate(ctx, task_dir, candidate_path):
    """Validate a task's baseline (or score a provided candidate) without
    any agent calls."""
    config: AppConfig = ctx.obj["config"]
    try:
        task = load_manifest(task_dir)
    except ManifestError as exc:
        raise click.ClickException(str(exc))
    backend = _build_backend(config)
    code = (
        Path(candidate_path).read_text(encoding="utf-8") if candidate_path else None
    )
    outcome = execute_and_filter(
        code,
        task.baseline_compile_command.split(),
        task,
        backend,
        Path(config.run_dir) / task.name / "evaluate",
        _thresholds_for(config),
        profile_mode=config.profile_mode,
        run_timeout=config.run_timeout,
    )
    valid = check_valid(outcome, task.size_labels)
    click.echo(f"compiled: {outcome.compiled}  ran: {outcome.ran}  "
               f"correct: {outcome.correct}  valid: {valid}")
    for result in outcome.size_results:
        click.echo(f"  {result.size_label}: speedup {result.speedup}")
    if valid:
        click.echo(f"P = {weighted_score(outcome.size_results)}")
    else:
        click.echo(f"failure log: {outcome.failure_log[:500]}")
        sys.exit(1)


@main.command("run-suite")
@click.argument("suite_dir", type=click.Path(exists=True))
@click.pass_context
def run_suite_cmd(ctx, suite_dir):
    """Optimize every task in a suite directory."""
    config: AppConfig = ctx.obj["config"]
    script = ctx.obj["script"]
    try:
        listing = enumerate_suite(suite_dir)
    except EmptySuite as exc:
        raise click.ClickException(str(exc))
    for problem in listing.problems:
        click.echo(f"warning: invalid manifest {problem.path}: {problem.message}",
                   err=True)
    backend = _build_backend(config)
    result = run_suite(
        list(listing.tasks),
        _pipeline_config(config),
        lambda task: _agents_for(config, script, task.name),
        backend,
        Path(config.run_dir),
        workers=config.workers,
        resume=ctx.obj["resume"],
    )
    by_name = {t.name: t for t in listing.tasks}
    for state in result.states:
        write_task_result(Path(config.run_dir), by_name[state.task], state)
        click.echo(f"{state.task}: P = {state.best_score}")
    for failure in result.failures:
        click.echo(f"{failure.task}: FAILED ({failure.error})", err=True)
    if result.failures and not result.states:
        sys.exit(1)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
@click.option("--taus", default=",".join(str(t) for t in DEFAULT_TAUS),
              help="Comma-separated ascending thresholds for the success curve.")
@click.pass_context
def report(ctx, run_dir, taus):
    """Aggregate completed runs into report.json and summary.md."""
    tau_values = [float(t) for t in taus.split(",") if t.strip()]
    try:
        suite_report = build_suite_report(run_dir, tau_values)
    except NoRuns as exc:
        raise click.ClickException(str(exc))
    report_path, summary_path = write_suite_report(run_dir, suite_report)
    click.echo(f"wrote {report_path} and {summary_path}")


if __name__ == "__main__":
    main()
