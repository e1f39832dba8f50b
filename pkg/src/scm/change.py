"""Difference map, attention weighting, OTSU thresholding and binarization."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateInputError

OTSU_BINS = 256


@dataclass(frozen=True)
class ChangeMap:
    values: np.ndarray  # H×W uint8 in {0, 1}
    threshold: float

    @property
    def shape(self):
        return self.values.shape


def cosine_difference(c1: np.ndarray, c2: np.ndarray, return_zero_count: bool = False):
    """Per-pixel cosine distance ``1 - cos(c1, c2)`` along the channel axis.

    Pixels where either vector has zero norm get distance 0. Values are
    clipped to [0, 2] to absorb rounding. With ``return_zero_count`` the
    number of such zero-norm pixels is returned as well.
    """
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if c1.shape != c2.shape:
        raise ValueError(f"feature shapes differ: {c1.shape} vs {c2.shape}")
    dot = np.einsum("...k,...k->...", c1, c2)
    # sqrt(a*b) rather than sqrt(a)*sqrt(b): identical vectors then give exactly 0
    denom = np.sqrt(np.einsum("...k,...k->...", c1, c1) * np.einsum("...k,...k->...", c2, c2))
    zero = denom == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = np.where(zero, 0.0, 1.0 - dot / np.where(zero, 1.0, denom))
    diff = np.clip(diff, 0.0, 2.0)
    if return_zero_count:
        return diff, int(zero.sum())
    return diff


def apply_attention(diff: np.ndarray, attention: np.ndarray) -> np.ndarray:
    diff = np.asarray(diff, dtype=np.float64)
    attention = np.asarray(attention, dtype=np.float64)
    if diff.shape != attention.shape:
        raise ValueError(f"difference map {diff.shape} and attention {attention.shape} differ")
    return diff * attention


def otsu_threshold(values, bins: int = OTSU_BINS) -> float:
    """OTSU threshold over the non-zero entries of ``values``.

    A ``bins``-bin histogram spans [min, max] of the non-zero values; the split
    maximizing between-class variance is searched exactly (integer
    arithmetic, first maximum wins) and the upper edge of the last
    lower-class bin is returned.

    Raises DegenerateInputError when there are no non-zero values or they are
    all equal.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[v != 0]
    if v.size == 0:
        raise DegenerateInputError("no non-zero values to threshold")
    lo, hi = v.min(), v.max()
    if lo == hi:
        raise DegenerateInputError("all non-zero values are equal")
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    counts = [int(c) for c in counts]
    total_n = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))

    best_k, best = 0, Fraction(-1)
    n0 = s0 = 0
    for k in range(bins - 1):
        n0 += counts[k]
        s0 += k * counts[k]
        n1, s1 = total_n - n0, total_s - s0
        if n0 == 0 or n1 == 0:
            score = Fraction(0)
        else:
            # between-class variance up to the constant factor 1/N^2
            score = Fraction((n1 * s0 - n0 * s1) ** 2, n0 * n1)
        if score > best:
            best_k, best = k, score
    return float(edges[best_k + 1])


def binarize(diff: np.ndarray, threshold: float) -> ChangeMap:
    """Pixels strictly above ``threshold`` are change."""
    diff = np.asarray(diff)
    return ChangeMap((diff > threshold).astype(np.uint8), float(threshold))
