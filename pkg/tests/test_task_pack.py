"""The CUDA task pack: manifest consistency, host-side self tests, mock-mode
integration, and the hardware-gated baseline validation.

The hardware check needs CUDAPILOT_CUDA_TESTS=1 plus nvcc on PATH; every
other test here runs without a GPU.
"""

import os
import re
import shutil
import subprocess
from pathlib import Path

import pytest

from cudapilot.evaluation import check_valid, weighted_score
from cudapilot.profiling import ThresholdSet
from cudapilot.tasks import Precision, enumerate_suite, load_manifest
from cudapilot.toolchain import (
    CudaBackend,
    MockBackend,
    SEGMENT_BEGIN,
    SEGMENT_END,
    execute_and_filter,
    splice_optimization_segment,
)

TASKPACK = Path(__file__).resolve().parent.parent / "taskpack"
SUITE_DIR = TASKPACK / "tasks"
TASK_NAMES = [
    "conv2d", "conv2d_bf16", "dot_product", "dot_product_bf16",
    "matrix_mul", "matrix_mul_bf16", "rms_norm", "rms_norm_bf16",
    "spmv_csr", "spmv_csr_bf16",
]


def test_suite_enumerates_all_ten_tasks():
    listing = enumerate_suite(SUITE_DIR)
    assert [t.name for t in listing.tasks] == TASK_NAMES
    assert listing.problems == ()


def test_precision_split():
    bf16 = enumerate_suite(SUITE_DIR, precision=Precision.BF16)
    assert all(t.name.endswith("_bf16") for t in bf16.tasks)
    assert len(bf16.tasks) == 5
    fp32 = enumerate_suite(SUITE_DIR, precision=Precision.FP32)
    assert len(fp32.tasks) == 5


def test_wrapper_signatures_match_across_precisions():
    listing = enumerate_suite(SUITE_DIR)
    by_name = {t.name: t for t in listing.tasks}
    for name in ("matrix_mul", "dot_product", "spmv_csr", "conv2d", "rms_norm"):
        fp32 = by_name[name]
        bf16 = by_name[f"{name}_bf16"]
        normalize = lambda sig: [
            p.replace("__nv_bfloat16", "float") for p in sig
        ]
        assert normalize(fp32.wrapper_signature) == normalize(bf16.wrapper_signature)


def test_every_harness_has_segment_markers():
    for task in enumerate_suite(SUITE_DIR).tasks:
        text = task.harness_path.read_text()
        assert SEGMENT_BEGIN in text and SEGMENT_END in text, task.name
        spliced = splice_optimization_segment(text, "// replacement\n")
        assert "// replacement" in spliced


def test_manifest_sizes_match_size_header():
    """The manifests must mirror tasks/common/taskpack_sizes.h exactly."""
    header = (SUITE_DIR / "common" / "taskpack_sizes.h").read_text()
    entries = re.findall(r'\{"([^"]+)",\s*(\d+)LL', header)
    header_sizes = {label: int(complexity) for label, complexity in entries}
    assert len(entries) == 15  # 5 tasks x 3 sizes, labels unique
    for task in enumerate_suite(SUITE_DIR).tasks:
        for size in task.sizes:
            assert size.label in header_sizes, (task.name, size.label)
            assert header_sizes[size.label] == size.complexity, (task.name, size.label)


def test_kernel_naming_conventions():
    for task in enumerate_suite(SUITE_DIR).tasks:
        baseline = task.baseline_path.read_text()
        assert f'extern "C" void {task.wrapper_name}(' in baseline
        harness = task.harness_path.read_text()
        assert f"{task.wrapper_name}_optimized(" in harness
        assert re.search(r"\w+_kernel_optimized", harness)


@pytest.mark.skipif(shutil.which("g++") is None, reason="g++ not available")
def test_host_reference_suite_passes():
    result = subprocess.run(
        ["make", "host-test"], cwd=TASKPACK, capture_output=True, text=True,
        timeout=600,
    )
    assert result.returncode == 0, result.stdout + result.stderr
    assert "SUCCESS" in result.stdout


def test_mock_backend_drives_taskpack_manifests(tmp_path):
    # without a GPU, the pack still exercises the whole control plane
    task = load_manifest(SUITE_DIR / "matrix_mul")
    outcome = execute_and_filter(
        None,
        task.baseline_compile_command.split(),
        task,
        MockBackend(seed=0),
        tmp_path / "w",
        ThresholdSet.default(),
        profile_mode="filtered",
    )
    assert check_valid(outcome, task.size_labels)
    assert weighted_score(outcome.size_results) == 1.0
    assert (tmp_path / "w" / "common" / "taskpack_host.h").exists()


# --- hardware-gated checks ----------------------------------------------------

CUDA_GATE = os.environ.get("CUDAPILOT_CUDA_TESTS") == "1" and shutil.which("nvcc")


def run_all_baselines(tmp_root: Path | None = None):
    """Compile and execute every shipped baseline on real hardware; the
    embedded candidate is a baseline copy, so P must land near 1.0."""
    import tempfile

    backend = CudaBackend()
    root = tmp_root or Path(tempfile.mkdtemp(prefix="taskpack-cuda-"))
    for task in enumerate_suite(SUITE_DIR).tasks:
        outcome = execute_and_filter(
            None,
            task.baseline_compile_command.split(),
            task,
            backend,
            root / task.name,
            ThresholdSet.default(),
            profile_mode="none",
            run_timeout=1200.0,
        )
        assert check_valid(outcome, task.size_labels), (
            task.name, outcome.failure_log[:2000],
        )
        score = weighted_score(outcome.size_results)
        assert 0.8 <= score <= 1.25, (task.name, score)


@pytest.mark.skipif(
    not CUDA_GATE,
    reason="CUDA hardware check: set CUDAPILOT_CUDA_TESTS=1 with nvcc on PATH",
)
def test_all_baselines_compile_and_self_check(tmp_path):
    run_all_baselines(tmp_path)


@pytest.mark.skipif(
    not CUDA_GATE,
    reason="CUDA hardware check: set CUDAPILOT_CUDA_TESTS=1 with nvcc on PATH",
)
def test_flipped_sign_candidate_reports_mismatch(tmp_path):
    task = load_manifest(SUITE_DIR / "dot_product")
    code = task.baseline_path.read_text()
    broken = (
        code.replace("dot_product_kernel", "dot_product_kernel_optimized")
        .replace('extern "C" void dot_product(', 'extern "C" void dot_product_optimized(')
        .replace("value += a[i] * b[i];", "value -= a[i] * b[i];")
    )
    outcome = execute_and_filter(
        broken,
        task.baseline_compile_command.split(),
        task,
        CudaBackend(),
        tmp_path / "w",
        ThresholdSet.default(),
        profile_mode="none",
    )
    assert outcome.compiled and outcome.ran and not outcome.correct
    assert "mismatches" in outcome.failure_log
    assert task.sizes[0].label in outcome.failure_log
