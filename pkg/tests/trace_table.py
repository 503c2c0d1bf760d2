"""Scripted-agent trace table for the optimization loop.

Scenarios are written as per-round attempt plans; ``reference_trace``
derives the expected agent call counts, final best score and ledger
directly from the loop's published semantics (debug only on invalid
candidates, break on first valid debug attempt, strict score improvement,
rejected schemes stay in the ledger).  It shares no code with the pipeline
package.  ``HAND_ANCHORS`` pins a handful of fully hand-computed cases so
the reference itself is cross-checked.

Attempt specs: "fail" (compile failure), "mismatch" (runs, wrong output),
or a float (valid candidate with that uniform speedup; the fixture task has
equal complexities, so the weighted score equals the speedup exactly).
"""

from __future__ import annotations

from dataclasses import dataclass

from conftest import NVCC_COMMAND, coder_response

ABLATIONS = {
    "full": (3, 3),
    "nd": (3, 0),
    "si": (1, 3),
    "sr": (1, 0),
}

# Per-scenario maximal attempt plans: scenario -> list of rounds, each round a
# list [initial, debug1, debug2, debug3].  Rounds beyond R are unused; debug
# attempts beyond D are unused.  Scenario keys double as their description.
SCENARIOS: dict[str, list[list]] = {
    # (a) first candidate already an improvement
    "first_valid_improvement": [
        [1.5, None, None, None],
        [1.2, None, None, None],
        [1.4, None, None, None],
    ],
    # (b) initial candidate broken, second debug attempt rescues it
    "debug_rescue_attempt_2": [
        ["fail", "fail", 1.5, None],
        [1.2, None, None, None],
        [1.3, None, None, None],
    ],
    # (c) every attempt of round 1 fails; later rounds recover mildly
    "debug_exhaustion": [
        ["fail", "fail", "fail", "fail"],
        [1.2, None, None, None],
        [1.1, None, None, None],
    ],
    # (d) valid but slower than the incumbent: rejected, no debugging
    "valid_but_slower": [
        [0.8, None, None, None],
        [0.9, None, None, None],
        [1.2, None, None, None],
    ],
    # (e) three valid candidates; the best of the three wins
    "best_of_three": [
        [1.5, None, None, None],
        [1.2, None, None, None],
        [2.0, None, None, None],
    ],
}


@dataclass(frozen=True)
class ExpectedTrace:
    planner_calls: int
    coder_calls: int
    compiler_calls: int
    debugger_calls: int
    best_score: float
    ledger_statuses: tuple[str, ...]


def _is_valid(spec) -> bool:
    return isinstance(spec, float)


def reference_trace(plan: list[list], rounds: int, debug_rounds: int) -> ExpectedTrace:
    planner = coder = compiler = debugger = 0
    best = 1.0
    statuses = []
    for round_index in range(rounds):
        attempts = plan[round_index]
        planner += 1
        consumed = [attempts[0]]
        if not _is_valid(attempts[0]):
            for d in range(1, debug_rounds + 1):
                spec = attempts[d]
                assert spec is not None, "scenario plan too short for this config"
                debugger += 1
                consumed.append(spec)
                if _is_valid(spec):
                    break
        coder += len(consumed)
        compiler += len(consumed)
        final = consumed[-1]
        if _is_valid(final) and final > best:
            best = final
            statuses.append("accepted")
        else:
            statuses.append("rejected")
    return ExpectedTrace(
        planner_calls=planner,
        coder_calls=coder,
        compiler_calls=compiler,
        debugger_calls=debugger,
        best_score=best,
        ledger_statuses=tuple(statuses),
    )


def consumed_attempts(plan: list[list], rounds: int, debug_rounds: int) -> list:
    """The attempt specs actually executed, in order."""
    specs = []
    for round_index in range(rounds):
        attempts = plan[round_index]
        specs.append(attempts[0])
        if not _is_valid(attempts[0]):
            for d in range(1, debug_rounds + 1):
                specs.append(attempts[d])
                if _is_valid(attempts[d]):
                    break
    return specs


def build_script(task_name: str, plan: list[list], rounds: int, debug_rounds: int) -> dict:
    """Exactly-sized per-role response queues realizing a scenario."""
    specs = consumed_attempts(plan, rounds, debug_rounds)
    coder_entries = []
    for spec in specs:
        if spec == "fail":
            directive = "// mock:compile_fail error: expected a declaration"
        elif spec == "mismatch":
            directive = "// mock:mismatch"
        else:
            directive = f"// mock:speedup {spec}"
        coder_entries.append(coder_response(task_name, directives=directive))
    expected = reference_trace(plan, rounds, debug_rounds)
    return {
        "planner": [f"scheme for round {i + 1}" for i in range(expected.planner_calls)],
        "coder": coder_entries,
        "compiler": [NVCC_COMMAND.format(name=task_name)] * expected.compiler_calls,
        "debugger": [f"debug hint {i + 1}" for i in range(expected.debugger_calls)],
    }


# Fully hand-derived anchors (worked out on paper from the loop semantics):
#   key: (scenario, ablation) -> ExpectedTrace
HAND_ANCHORS: dict[tuple[str, str], ExpectedTrace] = {
    # R=3, D=3: rescue in round 1 costs 2 debugger calls and 2 extra
    # coder/compiler calls; rounds 2-3 are single valid-but-slower attempts.
    ("debug_rescue_attempt_2", "full"): ExpectedTrace(
        planner_calls=3,
        coder_calls=5,
        compiler_calls=5,
        debugger_calls=2,
        best_score=1.5,
        ledger_statuses=("accepted", "rejected", "rejected"),
    ),
    # R=1, D=0: the broken candidate is simply rejected.
    ("debug_rescue_attempt_2", "sr"): ExpectedTrace(
        planner_calls=1,
        coder_calls=1,
        compiler_calls=1,
        debugger_calls=0,
        best_score=1.0,
        ledger_statuses=("rejected",),
    ),
    # R=1, D=3: all four attempts fail; debug runs to exhaustion.
    ("debug_exhaustion", "si"): ExpectedTrace(
        planner_calls=1,
        coder_calls=4,
        compiler_calls=4,
        debugger_calls=3,
        best_score=1.0,
        ledger_statuses=("rejected",),
    ),
    # R=3, D=3: a valid-but-slower candidate must not trigger debugging.
    ("valid_but_slower", "full"): ExpectedTrace(
        planner_calls=3,
        coder_calls=3,
        compiler_calls=3,
        debugger_calls=0,
        best_score=1.2,
        ledger_statuses=("rejected", "rejected", "accepted"),
    ),
    # R=3, D=3: best of three valid candidates; middle one rejected.
    ("best_of_three", "full"): ExpectedTrace(
        planner_calls=3,
        coder_calls=3,
        compiler_calls=3,
        debugger_calls=0,
        best_score=2.0,
        ledger_statuses=("accepted", "rejected", "accepted"),
    ),
    # R=1, D=3: first candidate valid; exactly one attempt, no debugging.
    ("first_valid_improvement", "si"): ExpectedTrace(
        planner_calls=1,
        coder_calls=1,
        compiler_calls=1,
        debugger_calls=0,
        best_score=1.5,
        ledger_statuses=("accepted",),
    ),
    # R=3, D=0: round 1 invalid and unrescued; rounds 2-3 improve twice.
    ("debug_rescue_attempt_2", "nd"): ExpectedTrace(
        planner_calls=3,
        coder_calls=3,
        compiler_calls=3,
        debugger_calls=0,
        best_score=1.3,
        ledger_statuses=("rejected", "accepted", "accepted"),
    ),
}
