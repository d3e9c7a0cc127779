"""Sharpness scoring and global+local sharp-frame selection.

A frame's sharpness is the variance of its Laplacian response. A video
is split globally from blurry frames by Otsu's threshold over a 64-bin
histogram of the scores; every segment that the global step leaves
without a sharp frame contributes its highest-scoring frame instead, so
each segment ends up with at least one selected frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .vidio import Sequence, luminance

LAPLACIAN_KERNEL = np.array([[0.0, 1.0, 0.0],
                             [1.0, -4.0, 1.0],
                             [0.0, 1.0, 0.0]])
HISTOGRAM_BINS = 64


@dataclass
class SelectionResult:
    threshold: float
    sharp_indices: set[int]
    per_segment_best: dict[int, int]


def laplacian_variance(frame: np.ndarray) -> float:
    """Variance of the 3x3 Laplacian response of the luminance plane.

    Replicate padding at the border; invariant to adding a constant to
    all pixels; zero exactly when the response is constant.
    """
    if frame.ndim == 3:
        plane = luminance(frame)
    else:
        plane = frame
    if plane.shape[0] < 3 or plane.shape[1] < 3:
        raise DataError(f"frame too small for 3x3 Laplacian: {plane.shape}")
    resp = ndimage.correlate(plane, LAPLACIAN_KERNEL, mode="nearest")
    return float(np.mean((resp - resp.mean()) ** 2))


def otsu_threshold(scores) -> float:
    """Threshold over a 64-bin histogram minimizing within-class variance.

    Scores strictly above the returned value classify as sharp. When no
    split separates two non-empty classes (all scores in one bin), the
    maximum score is returned so that everything classifies as blurry.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise DataError("otsu_threshold needs at least 2 scores")
    lo, hi = float(scores.min()), float(scores.max())
    if hi <= lo:
        return hi
    counts, edges = np.histogram(scores, bins=HISTOGRAM_BINS, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])

    best_t, best_var = hi, np.inf
    for i in range(HISTOGRAM_BINS):
        w0 = counts[: i + 1].sum()
        w1 = counts[i + 1:].sum()
        if w0 == 0 or w1 == 0:
            continue
        m0 = (counts[: i + 1] * centers[: i + 1]).sum() / w0
        m1 = (counts[i + 1:] * centers[i + 1:]).sum() / w1
        v0 = (counts[: i + 1] * (centers[: i + 1] - m0) ** 2).sum() / w0
        v1 = (counts[i + 1:] * (centers[i + 1:] - m1) ** 2).sum() / w1
        within = (w0 * v0 + w1 * v1) / (w0 + w1)
        if within < best_var:
            best_var = within
            best_t = float(edges[i + 1])
    return best_t


def segment_ranges(n_frames: int, segment_len: int):
    """Consecutive [start, stop) segment bounds; a short video is one segment."""
    if n_frames <= segment_len:
        return [(0, n_frames)]
    bounds = []
    for start in range(0, n_frames, segment_len):
        stop = min(start + segment_len, n_frames)
        if stop - start < 2 and bounds:
            bounds[-1] = (bounds[-1][0], stop)
        else:
            bounds.append((start, stop))
    return bounds


def select_sharp_frames(seq: Sequence, segment_len: int = 20) -> SelectionResult:
    """Global Otsu pass plus per-segment argmax fallback.

    Every segment contributes at least one selected frame; argmax ties
    break toward the earliest index.
    """
    if segment_len < 2:
        raise DataError(f"segment_len must be >= 2, got {segment_len}")
    scores = np.array([laplacian_variance(f) for f in seq.frames])
    threshold = otsu_threshold(scores)
    sharp = {int(i) for i in np.flatnonzero(scores > threshold)}

    per_segment_best: dict[int, int] = {}
    for seg_id, (start, stop) in enumerate(segment_ranges(len(seq), segment_len)):
        local = scores[start:stop]
        best = start + int(np.argmax(local))
        per_segment_best[seg_id] = best
        if not any(start <= i < stop for i in sharp):
            sharp.add(best)
    return SelectionResult(threshold=threshold, sharp_indices=sharp,
                           per_segment_best=per_segment_best)


def selection_accuracy(pred: SelectionResult | set, gold: set, n_frames: int) -> float:
    """Per-frame binary classification accuracy over all frames."""
    pred_set = pred.sharp_indices if isinstance(pred, SelectionResult) else set(pred)
    correct = sum(1 for i in range(n_frames) if (i in pred_set) == (i in gold))
    return correct / n_frames
