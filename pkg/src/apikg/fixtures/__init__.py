"""Shipped reproducibility kit and the golden-run check.

``running_example/`` holds seed and target corpora, pinned prompt templates,
hand-authored provider responses (``responses.json``), gold annotations and the
expected output of every stage (``golden/``).
"""

from __future__ import annotations

import difflib
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..pipeline import (
    CONSTRUCT_TRACE_FILE,
    EVAL_JSON_FILE,
    EVAL_TEXT_FILE,
    EXPLORE_TRACE_FILE,
    KG_RELIABLE_FILE,
    KG_UNRELIABLE_FILE,
    METRICS_FILE,
    SCHEMA_FILE,
    SCHEMA_VALIDATED_FILE,
    PipelineConfig,
    cmd_run,
    load_config,
)

GOLDEN_FILES = (
    SCHEMA_FILE,
    EXPLORE_TRACE_FILE,
    KG_UNRELIABLE_FILE,
    CONSTRUCT_TRACE_FILE,
    SCHEMA_VALIDATED_FILE,
    KG_RELIABLE_FILE,
    METRICS_FILE,
    EVAL_JSON_FILE,
    EVAL_TEXT_FILE,
)


def running_example_dir() -> Path:
    return Path(str(resources.files("apikg").joinpath("fixtures", "running_example")))


def running_example_config(out_dir: str | Path, **overrides) -> PipelineConfig:
    merged = {"out_dir": str(Path(out_dir).resolve())}
    merged.update(overrides)
    return load_config(running_example_dir() / "config.yaml", merged)


@dataclass
class GoldenReport:
    passed: bool
    diffs: dict[str, str] = field(default_factory=dict)
    checked: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        if self.passed:
            return f"golden run matches ({len(self.checked)} files)"
        parts = [f"golden run differs in: {', '.join(sorted(self.diffs))}"]
        parts += [self.diffs[name] for name in sorted(self.diffs)]
        return "\n".join(parts)


def compare_outputs(out_dir: Path, golden_dir: Path, files=GOLDEN_FILES) -> GoldenReport:
    diffs: dict[str, str] = {}
    for name in files:
        expected_path, actual_path = golden_dir / name, out_dir / name
        if not actual_path.is_file():
            diffs[name] = f"{name}: not produced"
            continue
        expected = expected_path.read_bytes() if expected_path.is_file() else b""
        actual = actual_path.read_bytes()
        if expected != actual:
            diffs[name] = "".join(
                difflib.unified_diff(
                    expected.decode("utf-8").splitlines(keepends=True),
                    actual.decode("utf-8").splitlines(keepends=True),
                    f"golden/{name}",
                    f"actual/{name}",
                )
            )
    return GoldenReport(not diffs, diffs, list(files))


def verify_golden(out_dir: str | Path | None = None, **overrides) -> GoldenReport:
    """Run the whole pipeline on the running example and diff every artifact.

    ``overrides`` are config keys (e.g. ``thresholds={"lift": 0.5}``) used to
    check that a perturbed run is detected.
    """
    with tempfile.TemporaryDirectory() as tmp:
        target = Path(out_dir) if out_dir is not None else Path(tmp)
        cmd_run(running_example_config(target, **overrides))
        return compare_outputs(target, running_example_dir() / "golden")
