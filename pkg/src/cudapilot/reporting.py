"""Suite-level report assembly from per-task result files.

Reports are plain data (JSON plus a text summary); plotting is left to
external tools.  Output is deterministic for identical inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

from .evaluation import (
    CLASS_ORDER,
    NoRuns,
    Score,
    cumulative_success,
    metric_improvements,
    migration_matrix,
)
from .profiling import BottleneckClass, FilteredProfile
from .toolchain import SizeResult

DEFAULT_TAUS = (0.0, 1.0, 2.0, 4.0, 8.0)


def load_task_results(run_dir: str | Path) -> list[dict]:
    """Read every per-task result file under a run directory, sorted by
    task name.  Tasks that failed before producing results are absent."""
    run_dir = Path(run_dir)
    results = []
    for path in sorted(run_dir.glob("*/result.json")):
        results.append(json.loads(path.read_text(encoding="utf-8")))
    return results


def _score_from_result(result: dict) -> Score:
    per_size = tuple(
        SizeResult(r["size_label"], r["complexity"], r["speedup"])
        for r in result.get("per_size", [])
    )
    return Score(
        P=result.get("best_score", 0.0),
        valid=bool(result.get("valid")),
        per_size=per_size,
    )


def _failure_score() -> Score:
    return Score(P=0.0, valid=False, per_size=())


def _profile_from_metrics(bottleneck: str, metrics: dict) -> FilteredProfile:
    return FilteredProfile(
        bottleneck=BottleneckClass[bottleneck],
        size_label="",
        kept_metrics=dict(metrics),
        interpretation="",
    )


def build_suite_report(
    run_dir: str | Path,
    taus=DEFAULT_TAUS,
    failures: list[str] | None = None,
) -> dict:
    """Aggregate curves, migration counts, per-class metric improvements and
    average cost/token usage over every completed run in ``run_dir``.

    ``failures`` lists task names that never completed; they count as
    invalid in the success curve denominators.
    """
    results = load_task_results(run_dir)
    if not results and not failures:
        raise NoRuns(run_dir)
    scores = [_score_from_result(r) for r in results]
    scores += [_failure_score() for _ in (failures or [])]
    curve = cumulative_success(scores, taus)

    migration_pairs = []
    before_profiles: dict[BottleneckClass, list[FilteredProfile]] = {
        cls: [] for cls in CLASS_ORDER
    }
    after_profiles: dict[BottleneckClass, list[FilteredProfile]] = {
        cls: [] for cls in CLASS_ORDER
    }
    for result in results:
        if not result.get("before_class") or not result.get("after_class"):
            continue
        before = BottleneckClass[result["before_class"]]
        after = BottleneckClass[result["after_class"]]
        migration_pairs.append((before, after))
        if result.get("before_metrics") and result.get("after_metrics"):
            before_profiles[before].append(
                _profile_from_metrics(result["before_class"], result["before_metrics"])
            )
            after_profiles[before].append(
                _profile_from_metrics(result["after_class"], result["after_metrics"])
            )

    if migration_pairs:
        migration = migration_matrix(migration_pairs).to_dict()
        improvements = {}
        for cls in CLASS_ORDER:
            if not before_profiles[cls]:
                continue
            improvements[cls.name] = [
                {
                    "metric": imp.metric,
                    "mean_pct": imp.mean_pct,
                    "std_pct": imp.std_pct,
                    "pairs": imp.pairs,
                    "excluded": imp.excluded,
                }
                for imp in metric_improvements(
                    before_profiles[cls], after_profiles[cls], cls
                )
            ]
    else:
        migration = None
        improvements = None

    count = len(results)
    if count:
        avg_cost = sum(r["usage"]["total_cost_usd"] for r in results) / count
        avg_tokens = sum(r["usage"]["total_tokens"] for r in results) / count
    else:
        avg_cost = 0.0
        avg_tokens = 0.0

    return {
        "tasks": [r["task"] for r in results],
        "failed_tasks": sorted(failures or []),
        "success_curve": {"taus": list(curve.taus), "rates": list(curve.rates)},
        "migration": migration,
        "metric_improvements": improvements,
        "usage": {
            "runs": count,
            "average_cost_usd": avg_cost,
            "average_tokens": avg_tokens,
            "per_task": {
                r["task"]: {
                    "cost_usd": r["usage"]["total_cost_usd"],
                    "tokens": r["usage"]["total_tokens"],
                }
                for r in results
            },
        },
        "scores": {r["task"]: r["best_score"] for r in results},
    }


def render_summary(report: dict) -> str:
    """Human-readable companion to the aggregate report."""
    lines = ["# Suite report", ""]
    lines.append(f"Completed tasks: {len(report['tasks'])}")
    if report["failed_tasks"]:
        lines.append("Failed tasks: " + ", ".join(report["failed_tasks"]))
    lines.append("")
    lines.append("## Cumulative success rate")
    curve = report["success_curve"]
    for tau, rate in zip(curve["taus"], curve["rates"]):
        lines.append(f"- P > {tau:g}: {rate:.2%}")
    lines.append("")
    lines.append("## Scores")
    for task, score in sorted(report["scores"].items()):
        lines.append(f"- {task}: P = {score:.4f}")
    lines.append("")
    if report["migration"] is None:
        lines.append("## Bottleneck migration")
        lines.append("unavailable (runs carried no profiles)")
    else:
        lines.append("## Bottleneck migration (before -> after counts)")
        order = report["migration"]["order"]
        counts = report["migration"]["counts"]
        for i, row_name in enumerate(order):
            cells = ", ".join(f"{order[j]}: {counts[i][j]}" for j in range(len(order)))
            lines.append(f"- {row_name} -> {cells}")
        lines.append("")
        lines.append("## Metric improvements by class")
        for cls, imps in (report["metric_improvements"] or {}).items():
            lines.append(f"### {cls}")
            for imp in imps:
                if imp["mean_pct"] is None:
                    lines.append(f"- {imp['metric']}: no pairs "
                                 f"({imp['excluded']} excluded)")
                else:
                    lines.append(
                        f"- {imp['metric']}: {imp['mean_pct']:+.1f}% "
                        f"(std {imp['std_pct']:.1f}%, n={imp['pairs']}, "
                        f"excluded {imp['excluded']})"
                    )
    lines.append("")
    usage = report["usage"]
    lines.append("## Usage")
    lines.append(f"- average cost per task: ${usage['average_cost_usd']:.4f}")
    lines.append(f"- average tokens per task: {usage['average_tokens']:.0f}")
    lines.append("")
    return "\n".join(lines)


def write_suite_report(run_dir: str | Path, report: dict) -> tuple[Path, Path]:
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    summary_path = run_dir / "summary.md"
    report_path.write_text(
        json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
    )
    summary_path.write_text(render_summary(report), encoding="utf-8")
    return report_path, summary_path
