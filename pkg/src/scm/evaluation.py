"""Confusion counts, F1 / mIoU / OA, and colour-coded comparison maps."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .change import ChangeMap
from .datasets import GroundTruth

# TP white, TN black, FP red, FN green
COLOURS = {
    "tp": (255, 255, 255),
    "tn": (0, 0, 0),
    "fp": (255, 0, 0),
    "fn": (0, 255, 0),
}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_binary(x) -> np.ndarray:
    if isinstance(x, ChangeMap):
        x = x.values
    elif isinstance(x, GroundTruth):
        x = x.mask
    return np.asarray(x).astype(bool)


def accumulate(pred, gt) -> ConfusionCounts:
    """Pixel counts with change as the positive class."""
    p, g = _as_binary(pred), _as_binary(gt)
    if p.shape != g.shape:
        raise ValueError(f"prediction {p.shape} and ground truth {g.shape} differ")
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp, p.size - tp - fp - fn, fp, fn)


def _ratio(num, den):
    return num / den if den else 0.0


def scores(c: ConfusionCounts) -> tuple[float, float, float]:
    """Return ``(f1, miou, oa)``.

    Empty denominators give 0 (for F1 and the per-class IoU). mIoU is the
    plain mean of the change and no-change IoUs.
    """
    if c.total == 0:
        raise ValueError("no pixels to score")
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    iou_change = _ratio(c.tp, c.tp + c.fp + c.fn)
    iou_same = _ratio(c.tn, c.tn + c.fp + c.fn)
    oa = (c.tp + c.tn) / c.total
    return f1, (iou_change + iou_same) / 2, oa


def render(pred, gt) -> np.ndarray:
    p, g = _as_binary(pred), _as_binary(gt)
    if p.shape != g.shape:
        raise ValueError(f"prediction {p.shape} and ground truth {g.shape} differ")
    out = np.zeros(p.shape + (3,), dtype=np.uint8)
    out[p & g] = COLOURS["tp"]
    out[p & ~g] = COLOURS["fp"]
    out[~p & g] = COLOURS["fn"]
    return out


@dataclass
class EvalReport:
    per_tile: list = field(default_factory=list)  # (tile id, ConfusionCounts)
    mode: str = "micro"
    failures: list = field(default_factory=list)

    def add(self, tile_id: str, counts: ConfusionCounts):
        self.per_tile.append((tile_id, counts))

    @property
    def counts(self) -> ConfusionCounts:
        total = ConfusionCounts()
        for _, c in self.per_tile:
            total = total + c
        return total

    def aggregate(self, mode: str | None = None) -> dict:
        """Dataset scores; ``micro`` pools pixel counts, ``macro`` averages tiles."""
        mode = mode or self.mode
        if not self.per_tile:
            return {"f1": None, "miou": None, "oa": None}
        if mode == "micro":
            f1, miou, oa = scores(self.counts)
        elif mode == "macro":
            f1, miou, oa = np.mean([scores(c) for _, c in self.per_tile], axis=0).tolist()
        else:
            raise ValueError(f"unknown aggregation mode {mode!r}")
        return {"f1": f1, "miou": miou, "oa": oa}

    @property
    def f1(self):
        return self.aggregate()["f1"]

    @property
    def miou(self):
        return self.aggregate()["miou"]

    @property
    def oa(self):
        return self.aggregate()["oa"]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "aggregate": self.aggregate(),
            "counts": asdict(self.counts),
            "tiles": [{"id": tid, **asdict(c)} for tid, c in self.per_tile],
            "failures": self.failures,
        }

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path) -> "EvalReport":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        report = cls(mode=doc.get("mode", "micro"))
        for t in doc["tiles"]:
            report.add(t["id"], ConfusionCounts(t["tp"], t["tn"], t["fp"], t["fn"]))
        return report
