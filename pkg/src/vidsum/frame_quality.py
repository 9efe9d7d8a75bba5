"""Per-frame luminance, sharpness and uniformity, and the undesirable-frame label."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateInputError, InputError
from .media_io import Frame, to_grayscale

NONE, DARK, BLURRY, UNIFORM = "none", "dark", "blurry", "uniform"
LABELS = (NONE, DARK, BLURRY, UNIFORM)

UNIFORMITY_BINS = 128
TOP_FRACTION = 0.05
TOP_BINS = math.ceil(TOP_FRACTION * UNIFORMITY_BINS)  # 7


@dataclass(frozen=True)
class QualityThresholds:
    y_min: float = 0.10
    s_min: float = 100.0
    u_min: float = 0.30

    def __post_init__(self):
        if min(self.y_min, self.s_min, self.u_min) < 0:
            raise InputError("quality thresholds must be non-negative")


@dataclass(frozen=True)
class QualityScores:
    y: float
    s: float
    u: float
    label: str = NONE


def sobel(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses on interior pixels, shape (h-2, w-2)."""
    g = np.asarray(gray, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise DegenerateInputError(f"Sobel needs a plane of at least 3x3, got {g.shape}")
    # separable form: [1 2 1] smoothing across, [-1 0 1] difference along
    dx = g[:, 2:] - g[:, :-2]
    gx = dx[:-2] + dx[2:]
    gx += 2.0 * dx[1:-1]
    sm = g[:, :-2] + g[:, 2:]
    sm += 2.0 * g[:, 1:-1]
    gy = sm[2:] - sm[:-2]
    return gx, gy


def luminance(frame) -> float:
    return float(to_grayscale(frame, "unit").mean())


def sharpness(frame) -> float:
    """Mean of squared Sobel gradient magnitude on the 0..255 gray plane."""
    gx, gy = sobel(to_grayscale(frame, "byte"))
    return float(np.mean(gx * gx + gy * gy))


def gray_histogram(gray_unit: np.ndarray, bins: int = UNIFORMITY_BINS) -> np.ndarray:
    idx = np.minimum((np.asarray(gray_unit).ravel() * bins).astype(np.int64), bins - 1)
    idx = np.maximum(idx, 0)
    hist = np.bincount(idx, minlength=bins).astype(np.float64)
    return hist / hist.sum()


def uniformity_from_histogram(hist: np.ndarray, top: int = TOP_BINS) -> float:
    top_mass = np.sort(hist)[::-1][:top].sum()
    return float(max(0.0, 1.0 - top_mass))


def uniformity(frame) -> float:
    """Histogram mass outside the 7 fullest of 128 gray bins (low = uniform)."""
    return uniformity_from_histogram(gray_histogram(to_grayscale(frame, "unit")))


def label(scores: QualityScores, thresholds: QualityThresholds = QualityThresholds()) -> str:
    if scores.y < thresholds.y_min:
        return DARK
    if scores.s < thresholds.s_min:
        return BLURRY
    if scores.u < thresholds.u_min:
        return UNIFORM
    return NONE


def assess(frame: Frame, thresholds: QualityThresholds = QualityThresholds()) -> QualityScores:
    gray = to_grayscale(frame, "unit")
    y = float(gray.mean())
    gx, gy = sobel(gray * 255.0)
    s = float(np.mean(gx * gx + gy * gy))
    u = uniformity_from_histogram(gray_histogram(gray))
    raw = QualityScores(y, s, u)
    return QualityScores(y, s, u, label(raw, thresholds))


def relabel(scores: Iterable[QualityScores], thresholds: QualityThresholds) -> list[QualityScores]:
    out = []
    for sc in scores:
        out.append(QualityScores(sc.y, sc.s, sc.u, label(sc, thresholds)))
    return out


def write_scores_csv(path, scores: Iterable[QualityScores], indices: Iterable[int] | None = None):
    scores = list(scores)
    if indices is None:
        indices = range(len(scores))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "y", "s", "u", "label"])
        for i, sc in zip(indices, scores):
            w.writerow([i, repr(sc.y), repr(sc.s), repr(sc.u), sc.label])


def read_scores_csv(path) -> tuple[list[int], list[QualityScores]]:
    indices, scores = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            indices.append(int(row["index"]))
            scores.append(QualityScores(float(row["y"]), float(row["s"]),
                                        float(row["u"]), row["label"]))
    return indices, scores
