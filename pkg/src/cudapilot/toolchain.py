"""Execution backends and the composite compile/run/profile/classify stage.

Two backends share one interface: ``CudaBackend`` drives the real compiler,
harness binaries and profiler as argv subprocesses (no shell, one global
GPU lock), while ``MockBackend`` is a pure function of candidate content,
manifest and seed, so full pipelines replay byte-identically without a GPU.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .profiling import (
    FilteredProfile,
    MetricCatalog,
    DEFAULT_CATALOG,
    ProfileError,
    ProfileReport,
    ThresholdSet,
    classify,
    filter_metrics,
    parse_profiler_export,
)
from .tasks import TaskManifest


class ToolchainError(Exception):
    pass


class CompilerNotFound(ToolchainError):
    def __init__(self, name: str):
        super().__init__(f"compiler {name!r} not found on PATH")


class TimeoutExceeded(ToolchainError):
    pass


class ProfilerNotFound(ToolchainError):
    def __init__(self, name: str):
        super().__init__(f"profiler {name!r} not found on PATH")


class ProfilerTimeout(ToolchainError):
    pass


class UnparseableOutput(ToolchainError):
    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"harness stdout line {line_no}: {detail}")


class HarnessMarkersMissing(ToolchainError):
    def __init__(self):
        super().__init__("harness source lacks the optimization segment markers")


# ---------------------------------------------------------------------------
# Harness stdout block format


@dataclass(frozen=True)
class SizeResult:
    size_label: str
    complexity: int
    speedup: float

    def __post_init__(self):
        if self.complexity <= 0:
            raise ValueError("complexity must be positive")
        if not self.speedup > 0:
            raise ValueError("speedup must be positive")


_BLOCK_SEPARATOR = "====="
_SIZE_LINE_RE = re.compile(r"^Test case size: (.*)\. Complexity: (\d+)$")
_SPEEDUP_LINE_RE = re.compile(r"^Speedup ratio: ([-+0-9.eE]+)$")


def render_size_results(results: list[SizeResult]) -> str:
    """Render results in the harness block format (round-trips through
    :func:`parse_size_results`)."""
    parts = []
    for r in results:
        parts.append(
            f"Test case size: {r.size_label}. Complexity: {r.complexity}\n"
            f"Speedup ratio: {r.speedup}\n{_BLOCK_SEPARATOR}\n"
        )
    return "".join(parts)


def parse_size_results(stdout: str) -> list[SizeResult]:
    """Parse harness stdout blocks: size line, speedup line, separator."""
    lines = stdout.splitlines()
    results: list[SizeResult] = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        size_match = _SIZE_LINE_RE.match(lines[i])
        if not size_match:
            raise UnparseableOutput(i + 1, f"expected a test-case line, got {lines[i]!r}")
        if i + 1 >= len(lines):
            raise UnparseableOutput(i + 2, "missing 'Speedup ratio:' line")
        speed_match = _SPEEDUP_LINE_RE.match(lines[i + 1])
        if not speed_match:
            raise UnparseableOutput(
                i + 2, f"expected a 'Speedup ratio:' line, got {lines[i + 1]!r}"
            )
        try:
            result = SizeResult(
                size_label=size_match.group(1),
                complexity=int(size_match.group(2)),
                speedup=float(speed_match.group(1)),
            )
        except ValueError as exc:
            raise UnparseableOutput(i + 1, str(exc)) from None
        results.append(result)
        i += 2
        if i < len(lines):
            if lines[i].strip() != _BLOCK_SEPARATOR:
                raise UnparseableOutput(i + 1, f"expected separator, got {lines[i]!r}")
            i += 1
    if not results:
        raise UnparseableOutput(1, "no result blocks found")
    return results


# ---------------------------------------------------------------------------
# Result containers


@dataclass(frozen=True)
class CompileResult:
    success: bool
    binary_path: Path | None
    stderr_excerpt: str
    elapsed_ms: float


@dataclass(frozen=True)
class Failure:
    kind: str  # mismatch | cuda_error | timeout | crash
    detail: str


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    stdout: str
    size_results: tuple[SizeResult, ...]
    failure: Failure | None


@dataclass(frozen=True)
class Outcome:
    """Progress record of one candidate through the composite stage."""

    compiled: bool
    ran: bool
    correct: bool
    size_results: tuple[SizeResult, ...] = ()
    filtered_profiles: tuple[FilteredProfile, ...] = ()
    raw_profiles: tuple[ProfileReport, ...] = ()
    failure_log: str = ""

    def __post_init__(self):
        if self.correct and not (self.compiled and self.ran):
            raise ValueError("correct implies compiled and ran")
        if self.ran and not self.compiled:
            raise ValueError("ran implies compiled")

    def to_dict(self) -> dict:
        return {
            "compiled": self.compiled,
            "ran": self.ran,
            "correct": self.correct,
            "size_results": [
                {"size_label": r.size_label, "complexity": r.complexity, "speedup": r.speedup}
                for r in self.size_results
            ],
            "filtered_profiles": [fp.to_dict() for fp in self.filtered_profiles],
            "raw_profiles": [rp.to_dict() for rp in self.raw_profiles],
            "failure_log": self.failure_log,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Outcome":
        return cls(
            compiled=data["compiled"],
            ran=data["ran"],
            correct=data["correct"],
            size_results=tuple(
                SizeResult(r["size_label"], r["complexity"], r["speedup"])
                for r in data["size_results"]
            ),
            filtered_profiles=tuple(
                FilteredProfile.from_dict(fp) for fp in data["filtered_profiles"]
            ),
            raw_profiles=tuple(
                ProfileReport.from_dict(rp) for rp in data["raw_profiles"]
            ),
            failure_log=data["failure_log"],
        )


# ---------------------------------------------------------------------------
# Optimization segment splicing

SEGMENT_BEGIN = "// ===== OPTIMIZED IMPLEMENTATION BEGIN ====="
SEGMENT_END = "// ===== OPTIMIZED IMPLEMENTATION END ====="


def splice_optimization_segment(harness_text: str, code: str) -> str:
    """Replace the demarcated optimization segment of a harness source with
    ``code``; every byte outside the markers is preserved."""
    begin = harness_text.find(SEGMENT_BEGIN)
    end = harness_text.find(SEGMENT_END)
    if begin < 0 or end < 0 or end < begin:
        raise HarnessMarkersMissing()
    head = harness_text[: begin + len(SEGMENT_BEGIN)]
    tail = harness_text[end:]
    body = code if code.endswith("\n") else code + "\n"
    return head + "\n" + body + tail


def _stderr_tail(text: str, limit: int = 8192) -> str:
    return text[-limit:]


def _output_binary(argv: list[str], workdir: Path) -> Path:
    if "-o" in argv:
        idx = argv.index("-o")
        if idx + 1 < len(argv):
            return workdir / argv[idx + 1]
    return workdir / "a.out"


# ---------------------------------------------------------------------------
# Real backend


class CudaBackend:
    """Runs the actual toolchain as argv subprocesses.

    A single class-level lock serializes every GPU-touching subprocess
    (single-GPU assumption); concurrent pipelines queue on it.
    """

    name = "cuda"
    _gpu_lock = threading.Lock()

    def __init__(
        self,
        compile_timeout: float = 120.0,
        run_timeout: float = 300.0,
        profiler_argv: list[str] | None = None,
        memcheck_argv: list[str] | None = None,
        profiler_timeout: float = 600.0,
    ):
        self.compile_timeout = compile_timeout
        self.run_timeout = run_timeout
        self.profiler_argv = profiler_argv or ["ncu", "--csv", "--page", "details"]
        self.memcheck_argv = memcheck_argv or ["compute-sanitizer", "--tool", "memcheck"]
        self.profiler_timeout = profiler_timeout

    def compile(
        self, sources: list[Path], argv: list[str], workdir: Path, task: TaskManifest
    ) -> CompileResult:
        for src in sources:
            if not Path(src).exists():
                raise ToolchainError(f"source {src} does not exist")
        if shutil.which(argv[0]) is None:
            raise CompilerNotFound(argv[0])
        with self._gpu_lock:
            import time as _time

            t0 = _time.monotonic()
            try:
                proc = subprocess.run(
                    argv,
                    cwd=workdir,
                    capture_output=True,
                    text=True,
                    timeout=self.compile_timeout,
                )
            except subprocess.TimeoutExpired:
                raise TimeoutExceeded(
                    f"compile exceeded {self.compile_timeout}s"
                ) from None
            elapsed_ms = (_time.monotonic() - t0) * 1e3
        binary = _output_binary(argv, workdir)
        success = proc.returncode == 0 and binary.exists() and os.access(binary, os.X_OK)
        return CompileResult(
            success=success,
            binary_path=binary if success else None,
            stderr_excerpt=_stderr_tail(proc.stderr),
            elapsed_ms=elapsed_ms,
        )

    def run_binary(
        self, binary: Path, args: list[str], timeout: float, task: TaskManifest
    ) -> tuple[int | None, str, str]:
        with self._gpu_lock:
            try:
                proc = subprocess.run(
                    [str(binary)] + args,
                    cwd=binary.parent,
                    capture_output=True,
                    text=True,
                    timeout=timeout,
                )
            except subprocess.TimeoutExpired as exc:
                return None, exc.stdout or "", exc.stderr or ""
        return proc.returncode, proc.stdout, proc.stderr

    def memcheck(self, binary: Path, task: TaskManifest) -> str:
        tool = self.memcheck_argv[0]
        if shutil.which(tool) is None:
            return f"({tool} not available; raw exit status reported instead)"
        with self._gpu_lock:
            try:
                proc = subprocess.run(
                    self.memcheck_argv + [str(binary)],
                    cwd=binary.parent,
                    capture_output=True,
                    text=True,
                    timeout=self.run_timeout,
                )
            except subprocess.TimeoutExpired:
                return f"({tool} timed out)"
        return _stderr_tail(proc.stdout + proc.stderr)

    def profile_export(
        self, binary: Path, size_index: int, size_label: str, task: TaskManifest
    ) -> str:
        tool = self.profiler_argv[0]
        if shutil.which(tool) is None:
            raise ProfilerNotFound(tool)
        argv = self.profiler_argv + [str(binary), str(size_index)]
        with self._gpu_lock:
            try:
                proc = subprocess.run(
                    argv,
                    cwd=binary.parent,
                    capture_output=True,
                    text=True,
                    timeout=self.profiler_timeout,
                )
            except subprocess.TimeoutExpired:
                raise ProfilerTimeout(
                    f"profiler exceeded {self.profiler_timeout}s"
                ) from None
        if proc.returncode != 0:
            raise ToolchainError(
                f"profiler exited {proc.returncode}: {_stderr_tail(proc.stderr, 2048)}"
            )
        return proc.stdout


# ---------------------------------------------------------------------------
# Mock backend


_DIRECTIVE_RE = re.compile(r"//\s*mock:(\w+)(?:[ \t]+([^\n]*))?")
_KERNEL_OPT_RE = re.compile(r"\b(\w+_kernel_optimized)\b")
_GLOBAL_KERNEL_RE = re.compile(r"__global__\s+\w+\s+(\w+)")

_MOCK_SECTION_DISPLAY = {
    "compute_workload": "Compute Workload Analysis",
    "speed_of_light": "GPU Speed Of Light",
    "memory_workload": "Memory Workload Analysis",
    "occupancy": "Occupancy",
    "scheduler": "Scheduler Statistics",
    "warp_state": "Warp State Statistics",
}


def _hash_unit(*parts: str) -> float:
    """Deterministic float in [0, 1) from the given strings."""
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _clamp(value: float, lo: float = 0.0, hi: float = 100.0) -> float:
    return min(hi, max(lo, value))


def _synthesize_metrics(compute: float, dram: float, mem: float) -> dict[str, float]:
    """All catalog metrics from the three classification values via fixed
    affine maps, so every classifier branch is reachable from seeded data."""
    c, d, m = compute, dram, mem
    metrics = {
        "compute_sm_throughput": c,
        "dram_throughput": d,
        "memory_throughput": m,
        "issue_slots_busy": _clamp(0.85 * c + 2.0),
        "executed_ipc_active": round(0.040 * c + 0.20, 4),
        "issued_ipc_active": round(0.040 * c + 0.25, 4),
        "sm_busy": _clamp(0.90 * c + 3.0),
        "executed_ipc_elapsed": round(0.030 * c + 0.10, 4),
        "l1_tex_cache_throughput": _clamp(0.80 * m + 5.0),
        "l1_tex_hit_rate": _clamp(90.0 - 0.50 * m),
        "l2_cache_throughput": _clamp(0.70 * m + 4.0),
        "l2_hit_rate": _clamp(95.0 - 0.60 * m),
        "max_bandwidth": _clamp(0.95 * m + 4.0),
        "mem_busy": _clamp(0.90 * m + 2.0),
        "mem_pipes_busy": _clamp(0.85 * m + 1.0),
        "achieved_occupancy": _clamp(0.50 * c + 0.40 * m + 5.0),
        "achieved_active_warps_per_sm": round(0.24 * c + 0.19 * m + 2.4, 2),
        "active_warps_per_scheduler": round(0.060 * c + 0.050 * m + 0.60, 2),
        "eligible_warps_per_scheduler": round(0.020 * c + 0.010 * m + 0.20, 2),
        "issued_warp_per_scheduler": round(0.0040 * c + 0.0020 * m + 0.05, 4),
        "no_eligible": _clamp(80.0 - 0.40 * c - 0.30 * m),
        "warp_cycles_per_executed_instruction": round(40.0 - 0.25 * c + 0.10 * m, 2),
        "warp_cycles_per_issued_instruction": round(39.0 - 0.25 * c + 0.10 * m, 2),
    }
    metrics["one_or_more_eligible"] = _clamp(100.0 - metrics["no_eligible"])
    return metrics


@dataclass
class _MockDirectives:
    compile_fail: str | None = None
    cuda_error: bool = False
    timeout: bool = False
    mismatch: str | None = None  # size label ("" = first size)
    speedups: list[float] = field(default_factory=list)
    missing_size: str | None = None


def _scan_directives(source_text: str) -> _MockDirectives:
    directives = _MockDirectives()
    for name, arg in _DIRECTIVE_RE.findall(source_text):
        arg = (arg or "").strip()
        if name == "compile_fail":
            directives.compile_fail = arg or "error: mock compilation failure"
        elif name == "cuda_error":
            directives.cuda_error = True
        elif name == "timeout":
            directives.timeout = True
        elif name == "mismatch":
            directives.mismatch = arg
        elif name in ("speedup", "speedups") and arg:
            directives.speedups = [float(v) for v in arg.replace(",", " ").split()]
        elif name == "missing_size":
            directives.missing_size = arg
    return directives


class MockBackend:
    """Deterministic stand-in for the whole toolchain.

    Behavior is a pure function of (candidate content hash, manifest, seed).
    Candidate sources steer outcomes with ``// mock:<directive>`` comments:
    compile_fail, cuda_error, timeout, mismatch [label], speedups v1 v2 ...,
    missing_size label.  Without directives, per-size speedups derive from
    the content hash; a candidate byte-equal to the shipped harness (the
    baseline) always reports speedup 1.0.
    """

    name = "mock"

    def __init__(self, seed: int = 0):
        self.seed = str(seed)

    def _shipped_sha(self, task: TaskManifest) -> str:
        # the candidate program is the harness with its segment spliced, so
        # byte-equality with the shipped harness identifies the baseline
        try:
            text = Path(task.harness_path).read_text(encoding="utf-8")
        except OSError:
            text = ""
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def compile(
        self, sources: list[Path], argv: list[str], workdir: Path, task: TaskManifest
    ) -> CompileResult:
        content = "".join(Path(s).read_text(encoding="utf-8") for s in sources)
        directives = _scan_directives(content)
        if directives.compile_fail is not None:
            return CompileResult(
                success=False,
                binary_path=None,
                stderr_excerpt=directives.compile_fail,
                elapsed_ms=0.0,
            )
        kernels = _KERNEL_OPT_RE.findall(content) or _GLOBAL_KERNEL_RE.findall(content)
        kernel_name = kernels[0] if kernels else f"{task.wrapper_name}_kernel"
        payload = {
            "content_sha": hashlib.sha256(content.encode("utf-8")).hexdigest(),
            "is_baseline": hashlib.sha256(content.encode("utf-8")).hexdigest()
            == self._shipped_sha(task),
            "kernel_name": kernel_name,
            "directives": {
                "cuda_error": directives.cuda_error,
                "timeout": directives.timeout,
                "mismatch": directives.mismatch,
                "speedups": directives.speedups,
                "missing_size": directives.missing_size,
            },
        }
        binary = _output_binary(argv, workdir)
        binary.parent.mkdir(parents=True, exist_ok=True)
        binary.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        binary.chmod(0o755)
        return CompileResult(
            success=True, binary_path=binary, stderr_excerpt="", elapsed_ms=0.0
        )

    def _load(self, binary: Path) -> dict:
        return json.loads(Path(binary).read_text(encoding="utf-8"))

    def _speedup_for(self, payload: dict, task: TaskManifest, index: int) -> float:
        if payload["is_baseline"]:
            return 1.0
        speedups = payload["directives"]["speedups"]
        if speedups:
            return speedups[min(index, len(speedups) - 1)]
        label = task.sizes[index].label
        u = _hash_unit(self.seed, payload["content_sha"], label, "speedup")
        return round(0.5 + 2.0 * u, 4)

    def run_binary(
        self, binary: Path, args: list[str], timeout: float, task: TaskManifest
    ) -> tuple[int | None, str, str]:
        payload = self._load(binary)
        directives = payload["directives"]
        if directives["timeout"]:
            return None, "", ""
        if directives["cuda_error"]:
            return 3, "CUDA error: an illegal memory access was encountered\n", ""
        if directives["mismatch"] is not None:
            label = directives["mismatch"] or task.sizes[0].label
            size = task.size_for(label)
            expected = round(
                -1.0 + 2.0 * _hash_unit(self.seed, payload["content_sha"], label, "e"), 6
            )
            actual = round(expected + 10 * task.tolerance, 6)
            blob = {
                "error": "mismatch",
                "mismatches": {
                    "size_label": size.label,
                    "index": int(_hash_unit(self.seed, label) * 1000),
                    "expected": expected,
                    "actual": actual,
                    "abs_error": round(abs(actual - expected), 6),
                    "tolerance": task.tolerance,
                },
            }
            return 2, json.dumps(blob) + "\n", ""
        results = []
        for index, size in enumerate(task.sizes):
            if directives["missing_size"] == size.label:
                continue
            results.append(
                SizeResult(size.label, size.complexity, self._speedup_for(payload, task, index))
            )
        return 0, render_size_results(results), ""

    def memcheck(self, binary: Path, task: TaskManifest) -> str:
        payload = self._load(binary)
        return (
            "========= Invalid __global__ write of size 4 bytes\n"
            f"=========     at {payload['kernel_name']}+0x{payload['content_sha'][:6]}\n"
            "========= ERROR SUMMARY: 1 error\n"
        )

    def profile_export(
        self, binary: Path, size_index: int, size_label: str, task: TaskManifest
    ) -> str:
        payload = self._load(binary)
        sha = payload["content_sha"]
        rows = [["Kernel Name", "Section Name", "Metric Name", "Metric Unit", "Metric Value"]]
        main_duration = 10_000 + int(_hash_unit(self.seed, sha, size_label, "dur") * 4_990_000)
        for kernel, duration, salt in (
            (payload["kernel_name"], main_duration, "main"),
            ("mock_warmup_kernel", main_duration // 10, "aux"),
        ):
            compute = round(5.0 + 90.0 * _hash_unit(self.seed, sha, size_label, salt, "c"), 2)
            dram = round(5.0 + 90.0 * _hash_unit(self.seed, sha, size_label, salt, "d"), 2)
            mem = round(5.0 + 90.0 * _hash_unit(self.seed, sha, size_label, salt, "m"), 2)
            metrics = _synthesize_metrics(compute, dram, mem)
            catalog = DEFAULT_CATALOG
            for canonical in catalog.canonical_order():
                key = catalog.by_canonical[canonical]
                if canonical == "duration":
                    value, unit = f"{duration}", "nsecond"
                else:
                    value, unit = f"{metrics[canonical]:.2f}", key.unit
                rows.append(
                    [kernel, _MOCK_SECTION_DISPLAY[key.section], key.display, unit, value]
                )
        return "\n".join(",".join(_csv_cell(c) for c in row) for row in rows) + "\n"


def _csv_cell(value: str) -> str:
    if "," in value or '"' in value:
        return '"' + value.replace('"', '""') + '"'
    return value


# ---------------------------------------------------------------------------
# Composite stage


def _find_mismatch_blob(stdout: str) -> str:
    for line in stdout.splitlines():
        line = line.strip()
        if not line.startswith("{"):
            continue
        try:
            parsed = json.loads(line)
        except ValueError:
            continue
        if "mismatches" in parsed:
            return line
    return stdout.strip()


def execute(
    backend,
    binary: Path,
    task: TaskManifest,
    timeout: float = 300.0,
) -> RunResult:
    """Run the harness once (it iterates all sizes itself) and parse the
    block output; nonzero exits map to structured failures."""
    exit_code, stdout, stderr = backend.run_binary(binary, [], timeout, task)
    if exit_code is None:
        return RunResult(
            exit_code=-1,
            stdout=stdout,
            size_results=(),
            failure=Failure("timeout", f"harness exceeded {timeout}s"),
        )
    if exit_code == 0:
        results = parse_size_results(stdout)
        by_label = {s.label: s for s in task.sizes}
        for line_no, result in enumerate(results):
            expected = by_label.get(result.size_label)
            if expected is not None and expected.complexity != result.complexity:
                raise UnparseableOutput(
                    line_no * 3 + 1,
                    f"complexity {result.complexity} for size "
                    f"{result.size_label!r} does not match manifest "
                    f"({expected.complexity})",
                )
        return RunResult(
            exit_code=0, stdout=stdout, size_results=tuple(results), failure=None
        )
    if exit_code == 2:
        return RunResult(
            exit_code=2,
            stdout=stdout,
            size_results=(),
            failure=Failure("mismatch", _find_mismatch_blob(stdout)),
        )
    if exit_code == 3:
        log = backend.memcheck(binary, task)
        detail = (stdout + "\n" + log).strip()
        return RunResult(
            exit_code=3, stdout=stdout, size_results=(), failure=Failure("cuda_error", detail)
        )
    return RunResult(
        exit_code=exit_code,
        stdout=stdout,
        size_results=(),
        failure=Failure("crash", _stderr_tail(stdout + "\n" + stderr, 4096)),
    )


def profile_sizes(
    backend,
    binary: Path,
    task: TaskManifest,
    thresholds: ThresholdSet,
    catalog: MetricCatalog = DEFAULT_CATALOG,
) -> tuple[list[FilteredProfile], list[ProfileReport], list[str]]:
    """Profile each manifest size, keep the most time-consuming kernel per
    launch set, classify it and filter its metrics."""
    filtered: list[FilteredProfile] = []
    raw: list[ProfileReport] = []
    exports: list[str] = []
    for index, size in enumerate(task.sizes):
        export = backend.profile_export(binary, index, size.label, task)
        exports.append(export)
        reports = parse_profiler_export(export, size_label=size.label, catalog=catalog)
        top = max(reports, key=lambda r: r.duration_ns)
        bottleneck = classify(top, thresholds)
        filtered.append(filter_metrics(top, bottleneck, catalog))
        raw.append(top)
    return filtered, raw, exports


def execute_and_filter(
    code: str | None,
    command_argv: list[str],
    task: TaskManifest,
    backend,
    workdir: Path,
    thresholds: ThresholdSet,
    profile_mode: str = "filtered",
    run_timeout: float = 300.0,
    catalog: MetricCatalog = DEFAULT_CATALOG,
    save_exports_to: Path | None = None,
) -> Outcome:
    """Compile, run, correctness-gate and (on success) profile one candidate.

    ``code`` replaces the harness's demarcated optimization segment; ``None``
    runs the shipped harness verbatim (the baseline).  Stage failures
    short-circuit into the returned Outcome; nothing escapes this boundary
    except programmer errors.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    try:
        harness_text = task.harness_path.read_text(encoding="utf-8")
        program = (
            harness_text if code is None else splice_optimization_segment(harness_text, code)
        )
        harness_file = workdir / Path(task.harness_source).name
        harness_file.write_text(program, encoding="utf-8")
        if task.baseline_path.exists():
            shutil.copy(task.baseline_path, workdir / Path(task.baseline_source).name)
        # shared headers live in a common/ directory next to the task dirs
        common_dir = Path(task.root).parent / "common"
        if common_dir.is_dir():
            shutil.copytree(common_dir, workdir / "common", dirs_exist_ok=True)
        result = backend.compile([harness_file], command_argv, workdir, task)
    except ToolchainError as exc:
        return Outcome(compiled=False, ran=False, correct=False, failure_log=str(exc))
    if not result.success:
        return Outcome(
            compiled=False, ran=False, correct=False, failure_log=result.stderr_excerpt
        )
    run = execute_safely(backend, result.binary_path, task, run_timeout)
    if isinstance(run, Outcome):
        return run
    (workdir / "stdout.txt").write_text(run.stdout, encoding="utf-8")
    if run.failure is not None:
        return Outcome(
            compiled=True,
            ran=True,
            correct=False,
            failure_log=run.failure.detail,
        )
    filtered: list[FilteredProfile] = []
    raw: list[ProfileReport] = []
    failure_log = ""
    if profile_mode != "none":
        try:
            filtered, raw, exports = profile_sizes(
                backend, result.binary_path, task, thresholds, catalog
            )
            if save_exports_to is not None:
                save_exports_to.mkdir(parents=True, exist_ok=True)
                for index, export in enumerate(exports):
                    (save_exports_to / f"profile-{index}.csv").write_text(
                        export, encoding="utf-8"
                    )
        except (ToolchainError, ProfileError) as exc:
            failure_log = f"profiling failed: {exc}"
            filtered, raw = [], []
    return Outcome(
        compiled=True,
        ran=True,
        correct=True,
        size_results=run.size_results,
        filtered_profiles=tuple(filtered),
        raw_profiles=tuple(raw),
        failure_log=failure_log,
    )


def execute_safely(backend, binary: Path, task: TaskManifest, timeout: float):
    """`execute` with parse and toolchain errors folded into an invalid
    Outcome (nothing escapes the composite stage)."""
    try:
        return execute(backend, binary, task, timeout)
    except UnparseableOutput as exc:
        return Outcome(compiled=True, ran=True, correct=False, failure_log=str(exc))
    except ToolchainError as exc:
        return Outcome(compiled=True, ran=False, correct=False, failure_log=str(exc))
