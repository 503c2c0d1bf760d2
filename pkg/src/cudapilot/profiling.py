"""Profiler data plumbing: export parsing, Otsu threshold calibration,
three-way bottleneck classification and per-class metric filtering.

All functions here are pure over immutable inputs.
"""

from __future__ import annotations

import csv
import sys
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ProfileError(Exception):
    """Base error for profiler data handling."""


class MissingClassificationMetric(ProfileError):
    def __init__(self, metric: str, kernel: str = ""):
        self.metric = metric
        where = f" for kernel {kernel!r}" if kernel else ""
        super().__init__(f"classification metric {metric!r} absent{where}")


class MalformedRow(ProfileError):
    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


class EmptyExport(ProfileError):
    def __init__(self):
        super().__init__("profiler export contains no metric rows")


class DegenerateDistribution(ProfileError):
    def __init__(self, metric: str = ""):
        self.metric = metric
        what = f"metric {metric!r}" if metric else "input"
        super().__init__(f"{what} has fewer than two distinct values")


class BottleneckClass(Enum):
    COMPUTE = "Compute Bound"
    MEMORY_LATENCY = "Memory Latency Bound"
    MEMORY_BANDWIDTH = "Memory Bandwidth Bound"


# The three metrics driving classification.
COMPUTE_THROUGHPUT = "compute_sm_throughput"
DRAM_THROUGHPUT = "dram_throughput"
MEMORY_THROUGHPUT = "memory_throughput"
CLASSIFICATION_METRICS = (COMPUTE_THROUGHPUT, DRAM_THROUGHPUT, MEMORY_THROUGHPUT)

# Per-class kept-metric sets, in their canonical presentation order.
CLASS_METRICS: dict[BottleneckClass, tuple[str, ...]] = {
    BottleneckClass.COMPUTE: (
        "compute_sm_throughput",
        "issue_slots_busy",
        "executed_ipc_active",
        "sm_busy",
    ),
    BottleneckClass.MEMORY_LATENCY: (
        "l2_hit_rate",
        "l1_tex_hit_rate",
        "executed_ipc_elapsed",
        "mem_busy",
    ),
    BottleneckClass.MEMORY_BANDWIDTH: (
        "dram_throughput",
        "memory_throughput",
        "max_bandwidth",
        "mem_pipes_busy",
    ),
}

SECTIONS = (
    "compute_workload",
    "speed_of_light",
    "memory_workload",
    "occupancy",
    "scheduler",
    "warp_state",
)


@dataclass(frozen=True)
class MetricKey:
    canonical: str
    display: str
    section: str
    unit: str


class MetricCatalog:
    """Bijective canonical-name <-> display-name catalog, shipped as data."""

    def __init__(self, keys: list[MetricKey], version: str):
        self.version = version
        self.keys = tuple(keys)
        self.by_canonical = {k.canonical: k for k in keys}
        self.by_display = {k.display: k for k in keys}
        if len(self.by_canonical) != len(keys) or len(self.by_display) != len(keys):
            raise ProfileError("metric catalog is not bijective")
        for k in keys:
            if k.section not in SECTIONS:
                raise ProfileError(f"metric {k.canonical!r}: unknown section")

    def canonical_order(self) -> tuple[str, ...]:
        return tuple(k.canonical for k in self.keys)

    def display(self, canonical: str) -> str:
        return self.by_canonical[canonical].display

    def unit(self, canonical: str) -> str:
        return self.by_canonical[canonical].unit


def _load_catalog() -> MetricCatalog:
    data_file = resources.files("cudapilot").joinpath("data/metrics_v2024_1.toml")
    data = tomllib.loads(data_file.read_text(encoding="utf-8"))
    keys = [
        MetricKey(
            canonical=m["canonical"],
            display=m["display"],
            section=m["section"],
            unit=m["unit"],
        )
        for m in data["metric"]
    ]
    return MetricCatalog(keys, version=data["version"])


DEFAULT_CATALOG = _load_catalog()


@dataclass(frozen=True)
class ProfileReport:
    """Canonical metric map for one kernel launch.

    ``metrics`` is keyed by canonical metric name; ``duration`` is stored in
    nanoseconds both in ``duration_ns`` and under the ``duration`` key.
    """

    kernel_name: str
    size_label: str
    duration_ns: float
    metrics: dict[str, float]

    def __post_init__(self):
        for metric in CLASSIFICATION_METRICS:
            if metric not in self.metrics:
                raise MissingClassificationMetric(metric, self.kernel_name)
            value = self.metrics[metric]
            if not 0.0 <= value <= 100.0:
                raise ProfileError(
                    f"{metric} = {value} outside [0, 100] for kernel "
                    f"{self.kernel_name!r}"
                )
        if self.duration_ns < 0:
            raise ProfileError("duration_ns must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kernel_name": self.kernel_name,
            "size_label": self.size_label,
            "duration_ns": self.duration_ns,
            "metrics": dict(self.metrics),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProfileReport":
        return cls(
            kernel_name=data["kernel_name"],
            size_label=data["size_label"],
            duration_ns=data["duration_ns"],
            metrics=dict(data["metrics"]),
        )


@dataclass(frozen=True)
class ThresholdSet:
    compute_t: float
    dram_t: float
    mem_t: float
    provenance: str = "default"

    def __post_init__(self):
        for name, value in (
            ("compute_t", self.compute_t),
            ("dram_t", self.dram_t),
            ("mem_t", self.mem_t),
        ):
            if not 0.0 < value < 100.0:
                raise ProfileError(f"{name} = {value} must lie in (0, 100)")

    @classmethod
    def default(cls) -> "ThresholdSet":
        return cls(30.0, 30.0, 30.0, "default")


@dataclass(frozen=True)
class FilteredProfile:
    bottleneck: BottleneckClass
    size_label: str
    kept_metrics: dict[str, float]  # insertion-ordered per CLASS_METRICS
    interpretation: str

    def to_dict(self) -> dict:
        return {
            "bottleneck": self.bottleneck.name,
            "size_label": self.size_label,
            "kept_metrics": dict(self.kept_metrics),
            "interpretation": self.interpretation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FilteredProfile":
        return cls(
            bottleneck=BottleneckClass[data["bottleneck"]],
            size_label=data["size_label"],
            kept_metrics=dict(data["kept_metrics"]),
            interpretation=data["interpretation"],
        )


_DURATION_UNIT_NS = {
    "ns": 1.0,
    "nsecond": 1.0,
    "us": 1e3,
    "usecond": 1e3,
    "ms": 1e6,
    "msecond": 1e6,
    "s": 1e9,
    "second": 1e9,
}

_EXPORT_COLUMNS = (
    "Kernel Name",
    "Section Name",
    "Metric Name",
    "Metric Unit",
    "Metric Value",
)


def _parse_value(raw: str, line_no: int) -> float:
    cleaned = raw.strip().replace(",", "")
    try:
        return float(cleaned)
    except ValueError:
        raise MalformedRow(line_no, f"unparseable metric value {raw!r}") from None


def parse_profiler_export(
    text: str,
    size_label: str = "",
    catalog: MetricCatalog = DEFAULT_CATALOG,
) -> list[ProfileReport]:
    """Parse a comma-separated profiler details export into launch reports.

    Expected columns are (kernel name, section name, metric name, metric
    unit, metric value); a header row naming those columns may reorder or
    pad them.  Metrics outside the catalog are ignored.  Numeric values may
    carry thousands separators.  A new launch starts whenever the kernel
    name changes or a metric repeats for the current kernel.
    """
    rows = list(csv.reader(text.splitlines()))
    columns = {"kernel": 0, "metric": 2, "unit": 3, "value": 4}
    start = 0
    if rows and "Metric Name" in rows[0] and "Metric Value" in rows[0]:
        header = rows[0]
        columns = {
            "kernel": header.index("Kernel Name"),
            "metric": header.index("Metric Name"),
            "unit": header.index("Metric Unit"),
            "value": header.index("Metric Value"),
        }
        start = 1

    reports: list[ProfileReport] = []
    current_kernel: str | None = None
    current: dict[str, float] = {}
    current_duration = 0.0

    def flush():
        nonlocal current, current_duration, current_kernel
        if current_kernel is not None:
            reports.append(
                ProfileReport(
                    kernel_name=current_kernel,
                    size_label=size_label,
                    duration_ns=current_duration,
                    metrics=current,
                )
            )
        current = {}
        current_duration = 0.0
        current_kernel = None

    needed = max(columns.values()) + 1
    saw_rows = False
    for line_no, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        saw_rows = True
        if len(row) < needed:
            raise MalformedRow(line_no, f"expected {needed} columns, got {len(row)}")
        display = row[columns["metric"]].strip()
        key = catalog.by_display.get(display)
        if key is None:
            continue
        kernel = row[columns["kernel"]].strip()
        value = _parse_value(row[columns["value"]], line_no)
        unit = row[columns["unit"]].strip()
        if key.canonical == "duration":
            scale = _DURATION_UNIT_NS.get(unit.lower(), 1.0)
            value = value * scale
        if kernel != current_kernel or key.canonical in current:
            flush()
            current_kernel = kernel
        current[key.canonical] = value
        if key.canonical == "duration":
            current_duration = value
    flush()

    if not saw_rows:
        raise EmptyExport()
    if not reports:
        # rows existed but none carried catalog metrics, so no launch was
        # assembled; the first classification metric is necessarily absent
        raise MissingClassificationMetric(CLASSIFICATION_METRICS[0])
    return reports


def otsu_threshold(values: list[float]) -> float:
    """Split point maximizing between-class variance w0*w1*(mu0-mu1)^2.

    Candidates are midpoints between consecutive distinct sorted values; the
    low class is ``value <= t``.  Ties resolve to the smallest candidate.
    """
    ordered = sorted(float(v) for v in values)
    distinct = sorted(set(ordered))
    if len(distinct) < 2:
        raise DegenerateDistribution()
    n = len(ordered)
    best_t = 0.0
    best_score = float("-inf")
    for j in range(len(distinct) - 1):
        t = (distinct[j] + distinct[j + 1]) / 2.0
        k = bisect_right(ordered, t)
        w0 = k / n
        w1 = 1.0 - w0
        mu0 = sum(ordered[:k]) / k
        mu1 = sum(ordered[k:]) / (n - k)
        score = w0 * w1 * (mu0 - mu1) ** 2
        if score > best_score:
            best_score = score
            best_t = t
    return best_t


def calibrate(reports: list[ProfileReport], corpus_id: str) -> ThresholdSet:
    """Otsu-calibrate one threshold per classification metric over a corpus
    of baseline launch reports."""
    if len(reports) < 2:
        raise DegenerateDistribution("corpus")
    thresholds = {}
    for metric in CLASSIFICATION_METRICS:
        values = [r.metrics[metric] for r in reports]
        try:
            thresholds[metric] = otsu_threshold(values)
        except DegenerateDistribution:
            raise DegenerateDistribution(metric) from None
    return ThresholdSet(
        compute_t=thresholds[COMPUTE_THROUGHPUT],
        dram_t=thresholds[DRAM_THROUGHPUT],
        mem_t=thresholds[MEMORY_THROUGHPUT],
        provenance=f"calibrated({corpus_id})",
    )


def classify(report: ProfileReport, thresholds: ThresholdSet) -> BottleneckClass:
    """Three-way bottleneck classification.

    Compute-bound on high SM throughput; latency-bound when both memory
    utilization signals sit strictly below their thresholds; bandwidth-bound
    is the default branch, so threshold-equal values land there.
    """
    compute = report.metrics[COMPUTE_THROUGHPUT]
    dram = report.metrics[DRAM_THROUGHPUT]
    mem = report.metrics[MEMORY_THROUGHPUT]
    if compute > thresholds.compute_t:
        return BottleneckClass.COMPUTE
    if dram < thresholds.dram_t and mem < thresholds.mem_t:
        return BottleneckClass.MEMORY_LATENCY
    return BottleneckClass.MEMORY_BANDWIDTH


def _format_metric(canonical: str, value: float, catalog: MetricCatalog) -> str:
    unit = catalog.unit(canonical)
    suffix = f" {unit}" if unit else ""
    return f"{catalog.display(canonical)}: {value:.2f}{suffix}"


def _interpretation(
    bottleneck: BottleneckClass,
    kept: dict[str, float],
    missing: list[str],
    report: ProfileReport,
    catalog: MetricCatalog,
) -> str:
    lines: list[str] = []
    if bottleneck is BottleneckClass.COMPUTE:
        lines.append(
            "Execution units are the active limit; raise instruction "
            "throughput rather than memory traffic."
        )
        if kept.get("issue_slots_busy", 100.0) < 50.0:
            lines.append(
                "Issue Slots Busy is low: look for front-end stalls or "
                "divergence; unrolling and branch restructuring help."
            )
        if kept.get("executed_ipc_active", 4.0) < 1.0:
            lines.append(
                "Executed Ipc Active is low: execution pipelines are "
                "underfed; increase ILP or rebalance instruction mix."
            )
    elif bottleneck is BottleneckClass.MEMORY_LATENCY:
        lines.append(
            "Cores idle waiting on memory; improve locality and hide "
            "latency (tiling, shared memory staging, more parallelism)."
        )
        low_caches = [
            key
            for key in ("l2_hit_rate", "l1_tex_hit_rate")
            if kept.get(key, 100.0) < 50.0
        ]
        if low_caches:
            names = ", ".join(catalog.display(k) for k in low_caches)
            lines.append(f"Poor data locality: {names} below 50%.")
        if kept.get("executed_ipc_elapsed", 4.0) < 0.5:
            lines.append(
                "Executed Ipc Elapsed is very low: stalls dominate elapsed "
                "time; raise arithmetic intensity per memory access."
            )
        wcpe = report.metrics.get("warp_cycles_per_executed_instruction")
        if wcpe is not None:
            lines.append(
                f"Warp Cycles Per Executed Instruction: {wcpe:.2f} "
                "(stall cycles per instruction)."
            )
    else:
        lines.append(
            "Memory interface pressure limits the kernel; reduce data "
            "volume and improve access coalescing."
        )
        dram = kept.get("dram_throughput")
        peak = kept.get("max_bandwidth")
        if dram is not None and peak is not None and peak > 0 and dram >= 0.8 * peak:
            lines.append(
                "DRAM Throughput is near Max Bandwidth: the bus is "
                "saturated; only less data movement will help."
            )
    if missing:
        lines.append("Not collected: " + ", ".join(missing) + ".")
    return " ".join(lines)


def filter_metrics(
    report: ProfileReport,
    bottleneck: BottleneckClass,
    catalog: MetricCatalog = DEFAULT_CATALOG,
) -> FilteredProfile:
    """Keep exactly the class's metric set (in order), intersected with the
    metrics present in the report; absences are flagged in the
    interpretation text."""
    kept: dict[str, float] = {}
    missing: list[str] = []
    for canonical in CLASS_METRICS[bottleneck]:
        if canonical in report.metrics:
            kept[canonical] = report.metrics[canonical]
        else:
            missing.append(catalog.display(canonical))
    return FilteredProfile(
        bottleneck=bottleneck,
        size_label=report.size_label,
        kept_metrics=kept,
        interpretation=_interpretation(bottleneck, kept, missing, report, catalog),
    )


def render_profile_context(
    filtered: list[FilteredProfile],
    mode: str,
    raw: list[ProfileReport],
    catalog: MetricCatalog = DEFAULT_CATALOG,
) -> str:
    """Render the profiling context handed to the planning agent.

    ``mode`` is one of ``none`` (empty string), ``filtered`` (class header
    plus kept metrics per size) or ``full`` (every catalog metric present in
    the raw report per size).  Blocks follow the input order, which callers
    keep aligned with the manifest size order.
    """
    if mode == "none":
        return ""
    blocks: list[str] = []
    if mode == "filtered":
        for fp in filtered:
            lines = [
                f"Profile for test case size: {fp.size_label}",
                f"Bottleneck type: {fp.bottleneck.value}",
            ]
            lines += [
                "  " + _format_metric(k, v, catalog) for k, v in fp.kept_metrics.items()
            ]
            lines.append(f"Interpretation: {fp.interpretation}")
            blocks.append("\n".join(lines))
    elif mode == "full":
        for report in raw:
            lines = [f"Profile for test case size: {report.size_label}"]
            lines += [
                "  " + _format_metric(canonical, report.metrics[canonical], catalog)
                for canonical in catalog.canonical_order()
                if canonical in report.metrics
            ]
            blocks.append("\n".join(lines))
    else:
        raise ValueError(f"unknown profile mode {mode!r}")
    return "\n\n".join(blocks)


def write_thresholds(thresholds: ThresholdSet, path: str | Path) -> None:
    path = Path(path)
    text = (
        f"compute_t = {thresholds.compute_t!r}\n"
        f"dram_t = {thresholds.dram_t!r}\n"
        f"mem_t = {thresholds.mem_t!r}\n"
        f'provenance = "{thresholds.provenance}"\n'
    )
    path.write_text(text, encoding="utf-8")


def read_thresholds(path: str | Path) -> ThresholdSet:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return ThresholdSet(
        compute_t=float(data["compute_t"]),
        dram_t=float(data["dram_t"]),
        mem_t=float(data["mem_t"]),
        provenance=str(data.get("provenance", "default")),
    )
