"""Benchmark task manifests: loading, validation, serialization, discovery.

A task directory holds one ``manifest.toml`` next to the CUDA sources it
describes.  Manifests are immutable after load and safe to share across
concurrently running pipelines.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

DEFAULT_FP32_TOLERANCE = 1e-5
DEFAULT_BF16_TOLERANCE = 2e-2

CATEGORIES = ("dense", "sparse", "llm", "scientific", "numerical", "other")


class ManifestError(Exception):
    """Base error for invalid task manifests."""


class MissingField(ManifestError):
    def __init__(self, field_name: str):
        self.field_name = field_name
        super().__init__(f"manifest is missing required field {field_name!r}")


class DuplicateSize(ManifestError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"duplicate size label {label!r}")


class EmptySizes(ManifestError):
    def __init__(self):
        super().__init__("manifest declares no sizes")


class BadIdentifier(ManifestError):
    def __init__(self, value: str):
        self.value = value
        super().__init__(f"{value!r} is not a valid C identifier")


class PrecisionSuffixError(ManifestError):
    """Source filenames must carry the ``_bf16`` suffix iff precision is BF16."""


class EmptySuite(Exception):
    def __init__(self, message: str, problems: list["SuiteProblem"] | None = None):
        self.problems = problems or []
        super().__init__(message)


class Precision(Enum):
    FP32 = "FP32"
    BF16 = "BF16"


@dataclass(frozen=True)
class TestSize:
    """One benchmark scale: a dimension label and the baseline's theoretical
    operation count at that scale (supplied by the manifest author)."""

    label: str
    complexity: int

    def __post_init__(self):
        if not self.label:
            raise ManifestError("size label must be non-empty")
        if not isinstance(self.complexity, int) or self.complexity <= 0:
            raise ManifestError(
                f"size {self.label!r}: complexity must be a positive integer"
            )


@dataclass(frozen=True)
class TaskManifest:
    name: str
    category: str
    precision: Precision
    wrapper_name: str
    wrapper_signature: tuple[str, ...]
    baseline_source: str
    harness_source: str
    baseline_compile_command: str
    sizes: tuple[TestSize, ...]
    tolerance: float
    description: str
    root: Path = field(default=Path("."), compare=False, repr=False)

    @property
    def baseline_path(self) -> Path:
        return self.root / self.baseline_source

    @property
    def harness_path(self) -> Path:
        return self.root / self.harness_source

    @property
    def size_labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sizes)

    def size_for(self, label: str) -> TestSize:
        for s in self.sizes:
            if s.label == label:
                return s
        raise KeyError(label)


@dataclass(frozen=True)
class SuiteProblem:
    """A manifest that failed to load during suite discovery."""

    path: str
    message: str


@dataclass(frozen=True)
class SuiteListing:
    tasks: tuple[TaskManifest, ...]
    problems: tuple[SuiteProblem, ...]


def _require(data: dict, key: str):
    if key not in data:
        raise MissingField(key)
    return data[key]


def _has_bf16_suffix(source: str) -> bool:
    return Path(source).stem.endswith("_bf16")


def load_manifest(path: str | Path) -> TaskManifest:
    """Load and fully validate one task manifest.

    ``path`` may be the manifest file itself or a task directory containing
    ``manifest.toml``.  FP32 manifests omitting ``tolerance`` default to 1e-5
    (BF16 to 2e-2).
    """
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.toml"
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ManifestError(f"{path}: not valid TOML: {exc}") from exc

    name = _require(data, "name")
    if not _IDENTIFIER_RE.match(str(name)):
        raise BadIdentifier(str(name))
    category = _require(data, "category")
    if category not in CATEGORIES:
        raise ManifestError(
            f"unknown category {category!r}; expected one of {CATEGORIES}"
        )
    precision_raw = _require(data, "precision")
    try:
        precision = Precision(precision_raw)
    except ValueError:
        raise ManifestError(
            f"unknown precision {precision_raw!r}; expected FP32 or BF16"
        ) from None
    wrapper_name = _require(data, "wrapper_name")
    if not _IDENTIFIER_RE.match(str(wrapper_name)):
        raise BadIdentifier(str(wrapper_name))
    wrapper_signature = tuple(str(p) for p in _require(data, "wrapper_signature"))
    baseline_source = str(_require(data, "baseline_source"))
    harness_source = str(_require(data, "harness_source"))
    compile_command = str(_require(data, "baseline_compile_command"))
    description = str(_require(data, "description"))

    raw_sizes = data.get("size") or []
    if not raw_sizes:
        raise EmptySizes()
    sizes = []
    seen = set()
    for entry in raw_sizes:
        if "label" not in entry:
            raise MissingField("size.label")
        if "complexity" not in entry:
            raise MissingField("size.complexity")
        size = TestSize(label=str(entry["label"]), complexity=entry["complexity"])
        if size.label in seen:
            raise DuplicateSize(size.label)
        seen.add(size.label)
        sizes.append(size)

    tolerance = data.get("tolerance")
    if tolerance is None:
        tolerance = (
            DEFAULT_FP32_TOLERANCE
            if precision is Precision.FP32
            else DEFAULT_BF16_TOLERANCE
        )
    tolerance = float(tolerance)
    if tolerance <= 0:
        raise ManifestError("tolerance must be > 0")

    want_suffix = precision is Precision.BF16
    for source in (baseline_source, harness_source):
        if _has_bf16_suffix(source) != want_suffix:
            raise PrecisionSuffixError(
                f"source {source!r} violates the _bf16 suffix rule for "
                f"precision {precision.value}"
            )

    return TaskManifest(
        name=str(name),
        category=str(category),
        precision=precision,
        wrapper_name=str(wrapper_name),
        wrapper_signature=wrapper_signature,
        baseline_source=baseline_source,
        harness_source=harness_source,
        baseline_compile_command=compile_command,
        sizes=tuple(sizes),
        tolerance=tolerance,
        description=description,
        root=path.parent,
    )


def _toml_str(value: str) -> str:
    # json string escaping is a valid TOML basic string
    return json.dumps(value)


def serialize_manifest(manifest: TaskManifest) -> str:
    """Render a manifest back to its TOML file format (round-trips through
    :func:`load_manifest`)."""
    lines = [
        f"name = {_toml_str(manifest.name)}",
        f"category = {_toml_str(manifest.category)}",
        f"precision = {_toml_str(manifest.precision.value)}",
        f"wrapper_name = {_toml_str(manifest.wrapper_name)}",
        "wrapper_signature = ["
        + ", ".join(_toml_str(p) for p in manifest.wrapper_signature)
        + "]",
        f"baseline_source = {_toml_str(manifest.baseline_source)}",
        f"harness_source = {_toml_str(manifest.harness_source)}",
        f"baseline_compile_command = {_toml_str(manifest.baseline_compile_command)}",
        f"tolerance = {manifest.tolerance!r}",
        f"description = {_toml_str(manifest.description)}",
    ]
    for size in manifest.sizes:
        lines += [
            "",
            "[[size]]",
            f"label = {_toml_str(size.label)}",
            f"complexity = {size.complexity}",
        ]
    return "\n".join(lines) + "\n"


def enumerate_suite(
    suite_dir: str | Path,
    category: str | None = None,
    precision: Precision | None = None,
    predicate: Callable[[TaskManifest], bool] | None = None,
) -> SuiteListing:
    """Discover every task directory under ``suite_dir``.

    Returns valid tasks in lexicographic order of task name; manifests that
    fail validation are reported in ``problems`` rather than silently
    dropped.  Raises :class:`EmptySuite` when no valid task matches the
    filter.
    """
    suite_dir = Path(suite_dir)
    if not suite_dir.is_dir():
        raise EmptySuite(f"{suite_dir} is not a directory")
    tasks: list[TaskManifest] = []
    problems: list[SuiteProblem] = []
    for manifest_path in sorted(suite_dir.glob("*/manifest.toml")):
        try:
            manifest = load_manifest(manifest_path)
        except ManifestError as exc:
            problems.append(SuiteProblem(path=str(manifest_path), message=str(exc)))
            continue
        if category is not None and manifest.category != category:
            continue
        if precision is not None and manifest.precision is not precision:
            continue
        if predicate is not None and not predicate(manifest):
            continue
        tasks.append(manifest)
    tasks.sort(key=lambda m: m.name)
    if not tasks:
        raise EmptySuite(
            f"no task in {suite_dir} matches the filter "
            f"(category={category}, precision={precision})",
            problems,
        )
    return SuiteListing(tasks=tuple(tasks), problems=tuple(problems))
