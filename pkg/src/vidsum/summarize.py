"""Segment-level features, ranking and budgeted selection by 0/1 knapsack."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .aesthetics import FACE_DIMS, FRAME_DIM
from .errors import FormatError, InputError
from .segmentation import Segment, Segmentation

SEGMENT_DIM = 2 * FRAME_DIM                         # 124
SEGMENT_DIM_NO_FACES = 2 * (FRAME_DIM - len(FACE_DIMS))  # 120
DEFAULT_FRACTION = 0.15
COARSEN_ABOVE_SECONDS = 30 * 60.0


def aggregate(frame_vectors, exclude_faces: bool = True) -> np.ndarray:
    """Population mean and std per base dimension, interleaved as mean_i, std_i."""
    V = np.asarray(frame_vectors, dtype=np.float64)
    if V.ndim == 1:
        V = V[None, :]
    if V.shape[0] == 0:
        raise InputError("cannot aggregate an empty segment")
    if V.shape[1] != FRAME_DIM:
        raise InputError(f"frame vectors must have {FRAME_DIM} dims, got {V.shape[1]}")
    if exclude_faces:
        V = np.delete(V, FACE_DIMS, axis=1)
    out = np.empty(2 * V.shape[1])
    out[0::2] = V.mean(axis=0)
    # constant columns get an exact zero rather than round-off from the mean
    out[1::2] = np.where(V.max(axis=0) == V.min(axis=0), 0.0, V.std(axis=0))
    return out


@dataclass(frozen=True)
class RankedSegment:
    segment: Segment
    rank: float

    @property
    def weight(self) -> int:
        return len(self.segment)


def segment_features(seg: Segmentation, frame_vectors: dict[int, np.ndarray] | np.ndarray,
                     exclude_faces: bool = True) -> np.ndarray:
    """Stack aggregate() for each segment; ``frame_vectors`` is indexable by frame number."""
    rows = []
    for s in seg.segments:
        vecs = [frame_vectors[i] for i in range(s.start, s.end)]
        rows.append(aggregate(np.array(vecs), exclude_faces))
    dim = SEGMENT_DIM_NO_FACES if exclude_faces else SEGMENT_DIM
    return np.array(rows).reshape(len(rows), dim)


def rank_segments(seg: Segmentation, frame_vectors, model, exclude_faces: bool = True) -> list[RankedSegment]:
    feats = segment_features(seg, frame_vectors, exclude_faces)
    if feats.shape[1] != model.n_features:
        raise InputError(f"model expects {model.n_features} features, segments have {feats.shape[1]}")
    if not seg.segments:
        return []
    ranks = model.predict(feats)
    return [RankedSegment(s, float(r)) for s, r in zip(seg.segments, ranks)]


def knapsack(weights: Sequence[int], values: Sequence[float], W: int) -> tuple[list[int], float]:
    """Exact 0/1 knapsack.  Returns (chosen item indices ascending, optimal value).

    T[i, w] takes item i only on strict improvement, so among equal-value
    solutions the one leaving out later items wins.
    """
    W = int(W)
    if W < 0:
        raise InputError("budget must be non-negative")
    n = len(weights)
    if any(int(w) < 1 for w in weights):
        raise InputError("weights must be >= 1")
    T = np.zeros(W + 1)
    take = np.zeros((n, W + 1), dtype=bool)
    for i in range(n):
        w, v = int(weights[i]), float(values[i])
        if w > W:
            continue
        cand = T[: W + 1 - w] + v
        better = cand > T[w:]
        take[i, w:] = better
        T[w:] = np.where(better, cand, T[w:])
    chosen, cap = [], W
    for i in range(n - 1, -1, -1):
        if take[i, cap]:
            chosen.append(i)
            cap -= int(weights[i])
    chosen.reverse()
    return chosen, float(T[W])


def target_budget(n_frames: int, fraction: float = DEFAULT_FRACTION) -> int:
    if not 0.0 <= fraction <= 1.0:
        raise InputError("summary fraction must lie in [0, 1]")
    return int(math.floor(fraction * n_frames))


@dataclass
class Summary:
    selected: list[RankedSegment]
    W: int
    fps: float
    fraction: float = DEFAULT_FRACTION
    value: float = 0.0

    @property
    def total_frames(self) -> int:
        return sum(r.weight for r in self.selected)

    def frames(self) -> np.ndarray:
        if not self.selected:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(r.segment.start, r.segment.end) for r in self.selected])

    def to_dict(self, include_frames: bool = False) -> dict:
        d = {
            "fps": self.fps,
            "W": self.W,
            "fraction": self.fraction,
            "total_frames": self.total_frames,
            "segments": [{"start": r.segment.start, "end": r.segment.end, "rank": r.rank,
                          "start_seconds": r.segment.start / self.fps,
                          "end_seconds": r.segment.end / self.fps} for r in self.selected],
        }
        if include_frames:
            d["frames"] = self.frames().tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Summary":
        try:
            sel = [RankedSegment(Segment(int(s["start"]), int(s["end"])), float(s["rank"]))
                   for s in d["segments"]]
            return cls(sel, int(d["W"]), float(d["fps"]), float(d["fraction"]),
                       float(sum(r.rank for r in sel)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad summary document ({exc})") from exc


def knapsack_select(items: Sequence[RankedSegment], W: int, fps: float = 1.0,
                    fraction: float = DEFAULT_FRACTION, coarsen: bool = False) -> Summary:
    """Pick the segments maximising total rank with total frames <= W.

    With ``coarsen`` set and a video longer than 30 minutes, weights and budget
    move to 0.1 s units (weights rounded up, budget down) so the table stays small.
    """
    weights = [r.weight for r in items]
    values = [r.rank for r in items]
    budget = W
    if coarsen and items and items[-1].segment.end / fps > COARSEN_ABOVE_SECONDS:
        unit = fps * 0.1
        weights = [max(1, math.ceil(w / unit)) for w in weights]
        budget = int(math.floor(W / unit))
    chosen, value = knapsack(weights, values, budget)
    sel = sorted((items[i] for i in chosen), key=lambda r: r.segment.start)
    return Summary(sel, int(W), fps, fraction, value)


def summarize_ranked(items: Sequence[RankedSegment], n_frames: int, fps: float,
                     fraction: float = DEFAULT_FRACTION, coarsen: bool = False) -> Summary:
    return knapsack_select(items, target_budget(n_frames, fraction), fps, fraction, coarsen)


def emit_summary(summary: Summary, out, include_frames: bool = False) -> str:
    text = json.dumps(summary.to_dict(include_frames), indent=2) + "\n"
    Path(out).write_text(text)
    return text


def load_summary(path) -> Summary:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: cannot read summary ({exc})") from exc
    return Summary.from_dict(d)
