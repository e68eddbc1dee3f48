"""Per-class precision, recall, and F1 over jointly valid pixels.

Degenerate ratios (0/0) become 0 and are flagged rather than raised so that
batch evaluation never aborts on an empty class. The report shows a rounded
table for reading plus full-precision machine lines for scripting; the
average row is the unweighted mean of the two per-class F1 values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .raster import Grid, check_aligned, format_number


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()


def confusion(pred: Grid, truth: Grid, positive_class: int) -> Confusion:
    if positive_class not in (0, 1):
        raise DataError(f"positive_class must be 0 or 1, got {positive_class}")
    check_aligned([("prediction", pred), ("truth", truth)])
    both = pred.valid_mask() & truth.valid_mask()
    p = pred.values[both]
    t = truth.values[both]
    for name, vals in (("prediction", p), ("truth", t)):
        if not np.isin(vals, (0.0, 1.0)).all():
            raise DataError(f"{name} grid holds values other than class labels 0 and 1")
    pos = float(positive_class)
    pp = p == pos
    tp_ = t == pos
    return Confusion(
        tp=int(np.count_nonzero(pp & tp_)),
        fp=int(np.count_nonzero(pp & ~tp_)),
        fn=int(np.count_nonzero(~pp & tp_)),
        tn=int(np.count_nonzero(~pp & ~tp_)),
    )


def precision_recall_f1(c: Confusion) -> ClassMetrics:
    flags = []
    if c.tp + c.fp > 0:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision = 0.0
        flags.append("precision 0/0 -> 0")
    if c.tp + c.fn > 0:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall = 0.0
        flags.append("recall 0/0 -> 0")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        flags.append("f1 0/0 -> 0")
    return ClassMetrics(precision, recall, f1, tuple(flags))


_CLASS_NAMES = {0: "dry", 1: "flood"}


def report(pred: Grid, truth: Grid) -> str:
    """Rendered table plus machine lines, separated by a blank line.

    Machine lines are 'class P R F1' at full precision and parse back to the
    exact computed values; the final line carries the average F1 alone.
    Degenerate-metric flags follow as '#' comment lines.
    """
    per_class = {
        cls: precision_recall_f1(confusion(pred, truth, cls)) for cls in (0, 1)
    }
    avg_f1 = (per_class[0].f1 + per_class[1].f1) / 2.0

    rows = [f"{'class':<10}  {'precision':>9}  {'recall':>6}  {'f1':>4}"]
    for cls in (0, 1):
        m = per_class[cls]
        rows.append(
            f"{_CLASS_NAMES[cls]:<10}  {m.precision:>9.2f}  {m.recall:>6.2f}  {m.f1:>4.2f}"
        )
    rows.append(f"{'average_f1':<10}  {'':>9}  {'':>6}  {avg_f1:>4.2f}")
    rows.append("")
    for cls in (0, 1):
        m = per_class[cls]
        rows.append(
            f"{_CLASS_NAMES[cls]} {format_number(m.precision)} "
            f"{format_number(m.recall)} {format_number(m.f1)}"
        )
    rows.append(f"average_f1 {format_number(avg_f1)}")
    for cls in (0, 1):
        for flag in per_class[cls].flags:
            rows.append(f"# {_CLASS_NAMES[cls]}: {flag}")
    return "\n".join(rows) + "\n"


def parse_machine_lines(text: str) -> dict[str, tuple[float, ...]]:
    """Read the full-precision section back out of a report."""
    out: dict[str, tuple[float, ...]] = {}
    in_machine = False
    for line in text.splitlines():
        if not line.strip():
            in_machine = True
            continue
        if not in_machine or line.startswith("#"):
            continue
        parts = line.split()
        out[parts[0]] = tuple(float(v) for v in parts[1:])
    return out
