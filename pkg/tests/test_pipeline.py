"""The optimization loop against scripted agents on the mock backend."""

import json

import pytest

from cudapilot.agents import AgentClient, ChatSettings, TransportExhausted
from cudapilot.pipeline import (
    BaselineInvalid,
    PipelineConfig,
    SchemeEntry,
    format_former_plan,
    load_checkpoint,
    run_pipeline,
    run_suite,
    write_task_result,
)
from cudapilot.tasks import load_manifest
from cudapilot.toolchain import MockBackend
from cudapilot.transport import ScriptedTransport

from conftest import NVCC_COMMAND, coder_response, make_task_dir
from trace_table import (
    ABLATIONS,
    HAND_ANCHORS,
    SCENARIOS,
    build_script,
    reference_trace,
)


def make_agents(script: dict) -> AgentClient:
    return AgentClient(ScriptedTransport(script), ChatSettings(), "Test GPU")


def run_scenario(tmp_path, task, scenario: str, ablation: str, profile_mode="filtered"):
    rounds, debug_rounds = ABLATIONS[ablation]
    script = build_script(task.name, SCENARIOS[scenario], rounds, debug_rounds)
    agents = make_agents(script)
    config = PipelineConfig(rounds=rounds, debug_rounds=debug_rounds,
                            profile_mode=profile_mode)
    state = run_pipeline(task, config, agents, MockBackend(seed=0),
                         tmp_path / "runs")
    assert agents.transport.remaining() == {r: 0 for r in agents.transport.remaining()}
    return state


# --- former plan formatting ----------------------------------------------------


def test_former_plan_empty_is_baseline():
    assert format_former_plan([]) == "Baseline"


def test_former_plan_single_rejected():
    ledger = [SchemeEntry("use shared memory tiling", "rejected")]
    text = format_former_plan(ledger)
    assert text.startswith("All error plan: use shared memory tiling")


def test_former_plan_accepted_before_rejected():
    ledger = [
        SchemeEntry("vectorize loads", "accepted"),
        SchemeEntry("use shared memory tiling", "rejected"),
    ]
    text = format_former_plan(ledger)
    accepted_pos = text.index("vectorize loads")
    rejected_pos = text.index("All error plan:")
    assert accepted_pos < rejected_pos


def test_former_plan_concatenates_rejections():
    ledger = [SchemeEntry("plan a", "rejected"), SchemeEntry("plan b", "rejected")]
    assert format_former_plan(ledger) == "All error plan: plan a; plan b"


# --- hand anchors cross-check the reference simulator --------------------------


@pytest.mark.parametrize("key", sorted(HAND_ANCHORS))
def test_reference_trace_matches_hand_anchor(key):
    scenario, ablation = key
    rounds, debug_rounds = ABLATIONS[ablation]
    assert reference_trace(SCENARIOS[scenario], rounds, debug_rounds) == HAND_ANCHORS[key]


# --- scripted trace scenarios ---------------------------------------------------


@pytest.mark.parametrize("scenario", sorted(SCENARIOS))
@pytest.mark.parametrize("ablation", sorted(ABLATIONS))
def test_pipeline_matches_reference_trace(tmp_path, task, scenario, ablation):
    rounds, debug_rounds = ABLATIONS[ablation]
    expected = reference_trace(SCENARIOS[scenario], rounds, debug_rounds)
    state = run_scenario(tmp_path, task, scenario, ablation)
    calls = state.role_calls()
    assert calls["planner"] == expected.planner_calls
    assert calls["coder"] == expected.coder_calls
    assert calls["compiler"] == expected.compiler_calls
    assert calls["debugger"] == expected.debugger_calls
    assert state.best_score == expected.best_score
    assert tuple(e.status for e in state.ledger) == expected.ledger_statuses
    assert state.completed_rounds == rounds


def test_planner_sees_error_plan_prefix(tmp_path, task):
    # round 1 rejected -> round 2 planner user prompt carries the prefix
    script = build_script(task.name, SCENARIOS["valid_but_slower"], 2, 0)
    agents = make_agents(script)
    config = PipelineConfig(rounds=2, debug_rounds=0)
    run_pipeline(task, config, agents, MockBackend(seed=0), tmp_path / "runs")
    planner_calls = [c for c in agents.transport.calls if c[0] == "planner"]
    assert "The previous optimization plan was Baseline" in planner_calls[0][2]
    assert "All error plan: scheme for round 1" in planner_calls[1][2]


def test_debugger_receives_failing_code_and_log(tmp_path, task):
    script = build_script(task.name, SCENARIOS["debug_rescue_attempt_2"], 1, 3)
    agents = make_agents(script)
    config = PipelineConfig(rounds=1, debug_rounds=3)
    run_pipeline(task, config, agents, MockBackend(seed=0), tmp_path / "runs")
    debug_calls = [c for c in agents.transport.calls if c[0] == "debugger"]
    assert len(debug_calls) == 2
    user_text = debug_calls[0][2]
    assert "The CUDA operator's name I provided is matrix_mul" in user_text
    assert "expected a declaration" in user_text  # the compile failure log
    assert "matrix_mul_kernel_optimized" in user_text  # the failing test program


def test_coder_extraction_failure_enters_debug_loop(tmp_path, task):
    script = {
        "planner": ["scheme 1"],
        "coder": ["no code block at all",
                  coder_response(task.name, directives="// mock:speedup 1.5")],
        "compiler": [NVCC_COMMAND.format(name=task.name)],
        "debugger": ["add the missing fenced block"],
    }
    agents = make_agents(script)
    config = PipelineConfig(rounds=1, debug_rounds=3)
    state = run_pipeline(task, config, agents, MockBackend(seed=0), tmp_path / "runs")
    calls = state.role_calls()
    # the garbage response consumed a coder call but no compiler call
    assert calls == {"planner": 1, "coder": 2, "compiler": 1, "debugger": 1}
    assert state.best_score == 1.5


def test_invalid_round_never_mutates_best(tmp_path, task):
    script = build_script(task.name, SCENARIOS["debug_exhaustion"], 1, 0)
    agents = make_agents(script)
    config = PipelineConfig(rounds=1, debug_rounds=0)
    state = run_pipeline(task, config, agents, MockBackend(seed=0), tmp_path / "runs")
    assert state.best_score == 1.0
    assert state.best_code == task.baseline_path.read_text()
    assert [e.status for e in state.ledger] == ["rejected"]


def test_baseline_invalid_is_fatal(tmp_path):
    task_dir = make_task_dir(tmp_path, name="broken_task")
    harness = task_dir / "broken_task_test.cu"
    harness.write_text(harness.read_text() + "\n// mock:compile_fail broken baseline\n")
    task = load_manifest(task_dir)
    agents = make_agents({"planner": [], "coder": [], "compiler": [], "debugger": []})
    with pytest.raises(BaselineInvalid):
        run_pipeline(task, PipelineConfig(), agents, MockBackend(seed=0),
                     tmp_path / "runs")


def test_pipeline_persists_candidate_artifacts(tmp_path, task):
    state = run_scenario(tmp_path, task, "debug_rescue_attempt_2", "si")
    task_dir = tmp_path / "runs" / task.name
    assert (task_dir / "state.json").exists()
    assert (task_dir / "best.cu").read_text() == state.best_code
    assert (task_dir / "candidate-1" / "optimized.cu").exists()
    assert (task_dir / "candidate-1.debug-1" / "outcome.json").exists()
    assert (task_dir / "candidate-1.debug-2" / "outcome.json").exists()
    record = json.loads((task_dir / "candidate-1.debug-2" / "outcome.json").read_text())
    assert record["valid"] is True


def test_best_outcome_profiles_follow_best_candidate(tmp_path, task):
    state = run_scenario(tmp_path, task, "best_of_three", "full")
    assert state.best_score == 2.0
    assert len(state.best_outcome.filtered_profiles) == len(task.sizes)
    assert state.baseline_outcome.size_results[0].speedup == 1.0


def test_resume_equals_uninterrupted(tmp_path, task):
    plan = SCENARIOS["best_of_three"]
    config = PipelineConfig(rounds=3, debug_rounds=3)

    # uninterrupted reference
    script = build_script(task.name, plan, 3, 3)
    agents = make_agents(script)
    reference = run_pipeline(task, config, agents, MockBackend(seed=0),
                             tmp_path / "ref")

    # crashing run: round 2's planner exhausts its retries
    crash_script = build_script(task.name, plan, 3, 3)
    crash_script["planner"] = [
        crash_script["planner"][0],
        {"error": "rate_limit"}, {"error": "rate_limit"},
        {"error": "rate_limit"}, {"error": "rate_limit"},
    ]
    crash_script["coder"] = crash_script["coder"][:1]
    crash_script["compiler"] = crash_script["compiler"][:1]
    crash_agents = AgentClient(
        ScriptedTransport(crash_script),
        ChatSettings(backoff_base=0.0),
        "Test GPU",
    )
    with pytest.raises(TransportExhausted):
        run_pipeline(task, config, crash_agents, MockBackend(seed=0),
                     tmp_path / "resume")
    checkpoint = load_checkpoint(tmp_path / "resume" / task.name)
    assert checkpoint.completed_rounds == 1

    # resumed run with the full script; consumed calls are fast-forwarded
    resumed_agents = make_agents(build_script(task.name, plan, 3, 3))
    resumed = run_pipeline(task, config, resumed_agents, MockBackend(seed=0),
                           tmp_path / "resume", resume=True)
    assert resumed.best_score == reference.best_score
    assert resumed.best_code == reference.best_code
    assert [e.status for e in resumed.ledger] == [e.status for e in reference.ledger]
    assert resumed.completed_rounds == reference.completed_rounds
    assert resumed.usage.to_dict() == reference.usage.to_dict()
    assert resumed.best_outcome.size_results == reference.best_outcome.size_results


def test_run_suite_isolates_failures(tmp_path):
    suite = tmp_path / "suite"
    good_dir = make_task_dir(suite, name="good_task")
    bad_dir = make_task_dir(suite, name="zz_broken")
    harness = bad_dir / "zz_broken_test.cu"
    harness.write_text(harness.read_text() + "\n// mock:compile_fail nope\n")
    tasks = [load_manifest(good_dir), load_manifest(bad_dir)]

    def factory(task):
        return make_agents(build_script(task.name, SCENARIOS["first_valid_improvement"], 1, 0))

    config = PipelineConfig(rounds=1, debug_rounds=0)
    result = run_suite(tasks, config, factory, MockBackend(seed=0),
                       tmp_path / "runs", workers=1)
    assert [s.task for s in result.states] == ["good_task"]
    assert [f.task for f in result.failures] == ["zz_broken"]


def test_run_suite_parallel_matches_sequential(tmp_path):
    suite = tmp_path / "suite"
    dirs = [make_task_dir(suite, name=name)
            for name in ("alpha_task", "beta_task", "gamma_task")]
    tasks = [load_manifest(d) for d in dirs]

    def factory(task):
        return make_agents(build_script(task.name, SCENARIOS["best_of_three"], 2, 0))

    config = PipelineConfig(rounds=2, debug_rounds=0)
    seq = run_suite(tasks, config, factory, MockBackend(seed=0),
                    tmp_path / "runs-seq", workers=1)
    par = run_suite(tasks, config, factory, MockBackend(seed=0),
                    tmp_path / "runs-par", workers=3)
    assert [s.task for s in seq.states] == [s.task for s in par.states]
    assert [s.best_score for s in seq.states] == [s.best_score for s in par.states]


def test_write_task_result_contents(tmp_path, task):
    state = run_scenario(tmp_path, task, "best_of_three", "full")
    path = write_task_result(tmp_path / "runs", task, state)
    payload = json.loads(path.read_text())
    assert payload["task"] == task.name
    assert payload["best_score"] == 2.0
    assert payload["before_class"] in ("COMPUTE", "MEMORY_LATENCY", "MEMORY_BANDWIDTH")
    assert payload["after_class"] in ("COMPUTE", "MEMORY_LATENCY", "MEMORY_BANDWIDTH")
    assert payload["usage"]["total_tokens"] > 0
