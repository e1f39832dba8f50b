"""Slow, independent reference implementations used as test oracles."""
import math
from fractions import Fraction

import numpy as np


def cosine_distance_scalar(u, v):
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    if nu == 0 or nv == 0:
        return 0.0
    return 1.0 - dot / (nu * nv)


def otsu_bruteforce(values, bins=256):
    """Exhaustive between-class-variance search over histogram bins.

    Bin membership is found by scanning the edges; class statistics use exact
    rationals on bin indices. Returns the upper edge of the winning lower class.
    """
    v = [float(x) for x in np.ravel(values) if x != 0]
    lo, hi = min(v), max(v)
    edges = np.linspace(lo, hi, bins + 1)
    idx = []
    for x in v:
        k = bins - 1
        for b in range(bins):
            if edges[b] <= x < edges[b + 1]:
                k = b
                break
        idx.append(k)
    n = len(idx)
    best, best_t = None, None
    for t in range(bins - 1):
        low = [i for i in idx if i <= t]
        high = [i for i in idx if i > t]
        if not low or not high:
            var = Fraction(0)
        else:
            w0, w1 = Fraction(len(low), n), Fraction(len(high), n)
            m0, m1 = Fraction(sum(low), len(low)), Fraction(sum(high), len(high))
            var = w0 * w1 * (m0 - m1) ** 2
        if best is None or var > best:
            best, best_t = var, t
    return float(edges[best_t + 1])


def building_probability_oracle(similarities, n_building, temperature):
    logits = [temperature * s for s in similarities]
    m = max(logits)
    exps = [math.exp(z - m) for z in logits]
    total = math.fsum(exps)
    return math.fsum(exps[:n_building]) / total


def scores_oracle(tp, tn, fp, fn):
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    iou1 = tp / (tp + fp + fn) if (tp + fp + fn) else 0.0
    iou0 = tn / (tn + fp + fn) if (tn + fp + fn) else 0.0
    oa = (tp + tn) / (tp + tn + fp + fn)
    return f1, (iou1 + iou0) / 2, oa


def pixel_union_covers(specs, H, W, band=1024):
    """Paint every tile into a boolean canvas, one horizontal band at a time."""
    for r0 in range(0, H, band):
        r1 = min(r0 + band, H)
        canvas = np.zeros((r1 - r0, W), bool)
        for s in specs:
            a, b = max(s.row_start, r0), min(s.row_start + s.size, r1)
            if a < b:
                canvas[a - r0:b - r0, s.col_start:s.col_start + s.size] = True
        if not canvas.all():
            return False
    return True
