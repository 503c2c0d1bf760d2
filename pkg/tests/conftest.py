"""Shared fixtures: synthetic task directories driven by the mock backend.

Also prints one PASS/FAIL line per acceptance criterion when the
acceptance module runs.
"""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from cudapilot.tasks import TaskManifest, load_manifest

BASELINE_TEMPLATE = """\
#include <cuda_runtime.h>

__global__ void {name}_kernel(const float* a, const float* b, float* c, int n) {{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) c[i] = a[i] + b[i];
}}

extern "C" void {name}(const float* a, const float* b, float* c, int n) {{
    {name}_kernel<<<(n + 255) / 256, 256>>>(a, b, c, n);
    cudaDeviceSynchronize();
}}
"""

HARNESS_TEMPLATE = """\
#include <cuda_runtime.h>
#include "{name}.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void {name}_kernel_optimized(const float* a, const float* b, float* c, int n) {{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) c[i] = a[i] + b[i];
}}

extern "C" void {name}_optimized(const float* a, const float* b, float* c, int n) {{
    {name}_kernel_optimized<<<(n + 255) / 256, 256>>>(a, b, c, n);
    cudaDeviceSynchronize();
}}
// ===== OPTIMIZED IMPLEMENTATION END =====

int main(int argc, char** argv) {{
    return 0; // the real pack ships the timing/comparison body
}}
"""


def manifest_text(
    name: str,
    sizes: list[tuple[str, int]],
    category: str = "dense",
    precision: str = "FP32",
    tolerance: float | None = 1e-5,
    description: str = "elementwise vector addition over float arrays",
) -> str:
    suffix = "_bf16" if precision == "BF16" else ""
    lines = [
        f'name = "{name}"',
        f'category = "{category}"',
        f'precision = "{precision}"',
        f'wrapper_name = "{name}"',
        'wrapper_signature = ["const float* a", "const float* b", "float* c", "int n"]',
        f'baseline_source = "{name}{suffix}.cu"',
        f'harness_source = "{name}_test{suffix}.cu"',
        f'baseline_compile_command = "nvcc -O2 {name}_test{suffix}.cu -o {name}_test"',
        f'description = "{description}"',
    ]
    if tolerance is not None:
        lines.append(f"tolerance = {tolerance!r}")
    for label, complexity in sizes:
        lines += ["", "[[size]]", f'label = "{label}"', f"complexity = {complexity}"]
    return "\n".join(lines) + "\n"


def make_task_dir(
    root: Path,
    name: str = "matrix_mul",
    sizes: list[tuple[str, int]] | None = None,
    category: str = "dense",
    precision: str = "FP32",
    tolerance: float | None = 1e-5,
) -> Path:
    if sizes is None:
        sizes = [("M: 8, K: 8, N: 8", 128), ("M: 64, K: 64, N: 64", 128)]
    task_dir = root / name
    task_dir.mkdir(parents=True, exist_ok=True)
    suffix = "_bf16" if precision == "BF16" else ""
    (task_dir / "manifest.toml").write_text(
        manifest_text(name, sizes, category, precision, tolerance), encoding="utf-8"
    )
    (task_dir / f"{name}{suffix}.cu").write_text(
        BASELINE_TEMPLATE.format(name=name), encoding="utf-8"
    )
    (task_dir / f"{name}_test{suffix}.cu").write_text(
        HARNESS_TEMPLATE.format(name=name), encoding="utf-8"
    )
    return task_dir


def coder_response(name: str, directives: str = "", wrapper: str | None = None) -> str:
    """A well-formed coder reply: fenced code block plus the wrapper tag."""
    wrapper = wrapper or f"{name}_optimized"
    body = textwrap.dedent(
        f"""\
        Optimized implementation below.
        ```cuda
        {directives}
        __global__ void {name}_kernel_optimized(const float* a, const float* b, float* c, int n) {{
            int i = blockIdx.x * blockDim.x + threadIdx.x;
            if (i < n) c[i] = a[i] + b[i];
        }}

        extern "C" void {wrapper}(const float* a, const float* b, float* c, int n) {{
            {name}_kernel_optimized<<<(n + 255) / 256, 256>>>(a, b, c, n);
            cudaDeviceSynchronize();
        }}
        ```
        <{wrapper}>
        """
    )
    return body


NVCC_COMMAND = "nvcc -O3 {name}_test.cu -o {name}_test"


def compiler_response(name: str = "matrix_mul") -> str:
    return NVCC_COMMAND.format(name=name)


@pytest.fixture
def task_dir(tmp_path) -> Path:
    return make_task_dir(tmp_path)


@pytest.fixture
def task(task_dir) -> TaskManifest:
    return load_manifest(task_dir)


# --- acceptance criterion reporting -----------------------------------------

_ACCEPTANCE_PREFIX = "tests/test_acceptance.py"


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    nodeid = report.nodeid.replace("\\", "/")
    if _ACCEPTANCE_PREFIX not in nodeid:
        return
    name = nodeid.split("::", 1)[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name}", flush=True)
