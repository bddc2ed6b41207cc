"""Image-level classification metrics.

A study counts as predicted positive when at least one voxel of the
prediction volume exceeds the threshold (strict inequality, so an
all-threshold map is negative).  Sensitivity and specificity are
computed from the resulting 2x2 counts; when a denominator is zero the
metric is undefined and reported as "N/A", never as 0 or NaN.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateIdError, InvalidInputError, InvalidParameterError
from .volume import Volume3D


@dataclass(frozen=True)
class ImageLevelOutcome:
    """Per-study outcome: predicted/actual positivity."""

    study_id: str
    predicted: bool
    actual: bool


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise InvalidParameterError(
                    f"invalid parameter: {name} must be a non-negative integer, got {v!r}"
                )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def image_level_positive(prediction: Volume3D, threshold: float = 0.5) -> bool:
    """True iff any voxel value is strictly greater than ``threshold``."""
    if not isinstance(prediction, Volume3D):
        raise InvalidInputError(
            f"invalid input: prediction must be a Volume3D, got {type(prediction).__name__}"
        )
    threshold = float(threshold)
    return bool((prediction.data > threshold).any())


def confusion(outcomes) -> ConfusionCounts:
    """Aggregate outcomes into 2x2 counts; duplicate study ids are an error."""
    seen: set[str] = set()
    tp = fp = tn = fn = 0
    for o in outcomes:
        if o.study_id in seen:
            raise DuplicateIdError(f"duplicate id: study {o.study_id!r} listed more than once")
        seen.add(o.study_id)
        if o.predicted and o.actual:
            tp += 1
        elif o.predicted and not o.actual:
            fp += 1
        elif not o.predicted and o.actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def sensitivity(c: ConfusionCounts) -> float | None:
    """tp/(tp+fn); None when there are no actual positives."""
    denom = c.tp + c.fn
    if denom == 0:
        return None
    return c.tp / denom


def specificity(c: ConfusionCounts) -> float | None:
    """tn/(tn+fp); None when there are no actual negatives."""
    denom = c.tn + c.fp
    if denom == 0:
        return None
    return c.tn / denom


def metric_str(value: float | None, digits: int = 3) -> str:
    """Render a metric value, with None shown as N/A."""
    if value is None:
        return "N/A"
    return f"{value:.{digits}f}"


@dataclass(frozen=True)
class ManifestRow:
    study_id: str
    prediction_path: str
    actual_label: int


def read_metrics_manifest(path) -> list[ManifestRow]:
    """Read a CSV manifest with columns study_id, prediction_path, actual_label."""
    path = Path(path)
    rows: list[ManifestRow] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"study_id", "prediction_path", "actual_label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InvalidInputError(
                f"invalid input: manifest {path} must have columns "
                f"study_id, prediction_path, actual_label"
            )
        for lineno, row in enumerate(reader, start=2):
            label = row["actual_label"].strip()
            if label not in ("0", "1"):
                raise InvalidInputError(
                    f"invalid input: actual_label must be 0 or 1, got {label!r} "
                    f"on line {lineno} of {path}"
                )
            rows.append(
                ManifestRow(
                    study_id=row["study_id"].strip(),
                    prediction_path=row["prediction_path"].strip(),
                    actual_label=int(label),
                )
            )
    return rows


def render_report(c: ConfusionCounts, digits: int = 3) -> str:
    """Plain-text report: one metric per row, undefined printed as N/A."""
    lines = [
        "metric        value",
        f"sensitivity   {metric_str(sensitivity(c), digits)}",
        f"specificity   {metric_str(specificity(c), digits)}",
        f"tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn} n={c.total}",
    ]
    return "\n".join(lines) + "\n"


def render_report_csv(c: ConfusionCounts) -> str:
    """CSV report with raw counts and metrics ('' never used; N/A for undefined)."""
    sens = sensitivity(c)
    spec = specificity(c)
    header = "tp,fp,tn,fn,n,sensitivity,specificity"
    row = (
        f"{c.tp},{c.fp},{c.tn},{c.fn},{c.total},"
        f"{'N/A' if sens is None else repr(sens)},"
        f"{'N/A' if spec is None else repr(spec)}"
    )
    return header + "\n" + row + "\n"
