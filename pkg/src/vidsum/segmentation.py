"""Segments, split application, quality refinement and the short-segment merge pass."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, InputError
from .frame_quality import NONE


@dataclass(frozen=True)
class Segment:
    start: int
    end: int  # exclusive
    bad_fraction: float = 0.0

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise InputError(f"invalid segment [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass
class Segmentation:
    segments: list[Segment]
    n_frames: int
    fps: float = 1.0

    def __post_init__(self):
        for a, b in zip(self.segments, self.segments[1:]):
            if a.end > b.start:
                raise InputError(f"overlapping segments [{a.start},{a.end}) and [{b.start},{b.end})")
        if self.segments and self.segments[-1].end > self.n_frames:
            raise InputError("segment extends past the end of the video")

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def covered(self) -> int:
        return sum(len(s) for s in self.segments)

    def intervals(self) -> list[tuple[int, int]]:
        return [(s.start, s.end) for s in self.segments]

    def to_dict(self) -> dict:
        return {"fps": self.fps, "n_frames": self.n_frames,
                "segments": [{"start": s.start, "end": s.end} for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "Segmentation":
        try:
            segs = [Segment(int(s["start"]), int(s["end"])) for s in d["segments"]]
            return cls(segs, int(d["n_frames"]), float(d["fps"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad segmentation document ({exc})") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Segmentation":
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply_splits(n_frames: int, splits: Sequence[int], fps: float = 1.0) -> Segmentation:
    """k ascending full-rate split frames -> k+1 contiguous segments covering [0, n)."""
    splits = [int(s) for s in splits]
    for s in splits:
        if not 0 < s < n_frames:
            raise InputError(f"split {s} outside (0, {n_frames})")
    if any(b <= a for a, b in zip(splits, splits[1:])):
        raise InputError("splits must be strictly increasing")
    edges = [0, *splits, n_frames]
    return Segmentation([Segment(a, b) for a, b in zip(edges, edges[1:])], n_frames, fps)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate([[0], mask.astype(np.int8), [0]])
    d = np.diff(padded)
    return list(zip(np.flatnonzero(d == 1).tolist(), np.flatnonzero(d == -1).tolist()))


def refine_by_quality(seg: Segmentation, labels: Sequence[str], discard_fraction: float = 0.5,
                      max_bad_run: int = 12) -> Segmentation:
    """Drop mostly-bad segments, trim bad frames at the ends, split at long bad runs.

    The discard test uses each segment's content before trimming.
    """
    if len(labels) < seg.n_frames:
        raise InputError(f"{len(labels)} labels for {seg.n_frames} frames")
    bad = np.array([lab != NONE for lab in labels[: seg.n_frames]], dtype=bool)
    out: list[Segment] = []
    for s in seg.segments:
        local = bad[s.start:s.end]
        frac = float(local.mean())
        if frac > discard_fraction:
            continue
        good = np.flatnonzero(~local)
        if good.size == 0:
            continue
        lo, hi = int(good[0]), int(good[-1]) + 1
        pieces, cursor = [], lo
        for a, b in _runs(local[lo:hi]):
            if b - a > max_bad_run:
                pieces.append((cursor, lo + a))
                cursor = lo + b
        pieces.append((cursor, hi))
        for a, b in pieces:
            if b > a:
                sub = local[a:b]
                out.append(Segment(s.start + a, s.start + b, float(sub.mean())))
    return Segmentation(out, seg.n_frames, seg.fps)


@dataclass
class _Mutable:
    start: int
    end: int
    bad: float
    removed: bool = field(default=False)

    def __len__(self):
        return self.end - self.start


def _gap(a: _Mutable, b: _Mutable) -> int:
    return b.start - a.end


def _merge_bad(a: _Mutable, b: _Mutable) -> float:
    return (a.bad * len(a) + b.bad * len(b)) / (len(a) + len(b))


def post_process_short_segments(seg: Segmentation, d_m: int, d_b: int) -> Segmentation:
    """One left-to-right merge/eliminate pass over (prev, cur, next) triples.

    A segment of at most ``d_m`` frames absorbs a neighbour whose gap is at
    most ``d_b`` frames; if it absorbs neither, it is removed.  Triples are
    taken from the input order; removals apply immediately and removed
    segments are skipped, both as the current item and as a merge partner.
    Only interior segments are tested; the first and last act as partners.
    """
    items = [_Mutable(s.start, s.end, s.bad_fraction) for s in seg.segments]
    for prev, cur, nxt in zip(items, items[1:], items[2:]):
        if cur.removed or len(cur) > d_m:
            continue
        merged = False
        if not prev.removed and _gap(prev, cur) <= d_b:
            prev.removed = True
            cur.bad = _merge_bad(prev, cur)
            cur.start = prev.start
            merged = True
        if not nxt.removed and _gap(cur, nxt) <= d_b:
            nxt.removed = True
            cur.bad = _merge_bad(cur, nxt)
            cur.end = nxt.end
            merged = True
        if not merged:
            cur.removed = True
    kept = [Segment(m.start, m.end, m.bad) for m in items if not m.removed]
    return Segmentation(kept, seg.n_frames, seg.fps)


def with_bad_fractions(seg: Segmentation, labels: Sequence[str]) -> Segmentation:
    bad = np.array([lab != NONE for lab in labels], dtype=bool)
    segs = [replace(s, bad_fraction=float(bad[s.start:s.end].mean())) for s in seg.segments]
    return Segmentation(segs, seg.n_frames, seg.fps)
