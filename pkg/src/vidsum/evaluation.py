"""Pairwise F1 against user summaries, timing records and the duration/time line fit.

Per-user terms follow the printed definitions: p_i divides the overlap by the
user's frame count and r_i by the machine summary's frame count.  This swaps
the usual precision/recall roles, but F1 is symmetric so the score is the same.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import FormatError, InputError


def intervals_to_frames(intervals: Iterable[Sequence[int]], n_frames: int | None = None) -> np.ndarray:
    parts = []
    for a, b in intervals:
        a, b = int(a), int(b)
        if b < a or a < 0 or (n_frames is not None and b > n_frames):
            raise InputError(f"interval [{a}, {b}) outside the video")
        parts.append(np.arange(a, b))
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(parts))


@dataclass
class UserAnnotations:
    n_frames: int
    users: list[list[tuple[int, int]]]

    def __post_init__(self):
        for sel in self.users:
            spans = sorted((int(a), int(b)) for a, b in sel)
            for a, b in spans:
                if not 0 <= a <= b <= self.n_frames:
                    raise InputError(f"user interval [{a}, {b}) outside [0, {self.n_frames})")
            for (a0, b0), (a1, _) in zip(spans, spans[1:]):
                if a1 < b0:
                    raise InputError("user intervals overlap")

    def frame_sets(self) -> list[np.ndarray]:
        return [intervals_to_frames(sel, self.n_frames) for sel in self.users]

    @classmethod
    def from_dict(cls, d: dict) -> "UserAnnotations":
        try:
            users = [[(int(a), int(b)) for a, b in sel] for sel in d["users"]]
            return cls(int(d["n_frames"]), users)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad annotations document ({exc})") from exc

    @classmethod
    def load(cls, path) -> "UserAnnotations":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise FormatError(f"{path}: cannot read annotations ({exc})") from exc
        return cls.from_dict(d)


@dataclass
class EvalReport:
    precision: list[float]
    recall: list[float]
    f1_per_user: list[float]
    f1: float
    empty_summary: bool = False
    timing: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def pairwise_f1(summary_frames, annotations: UserAnnotations) -> EvalReport:
    if not annotations.users:
        raise InputError("need at least one user summary")
    S = np.unique(np.asarray(summary_frames, dtype=np.int64))
    ps, rs, fs = [], [], []
    for U in annotations.frame_sets():
        inter = int(np.intersect1d(S, U, assume_unique=True).size)
        p = _ratio(inter, U.size)
        r = _ratio(inter, S.size)
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        ps.append(p)
        rs.append(r)
        fs.append(f)
    return EvalReport(ps, rs, fs, float(np.mean(fs)), empty_summary=S.size == 0)


@dataclass
class TimingRecord:
    video_seconds: float
    processing_seconds: float
    label: str = ""

    @property
    def speed_multiplier(self) -> float:
        return self.video_seconds / self.processing_seconds if self.processing_seconds > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"label": self.label, "video_seconds": self.video_seconds,
                "processing_seconds": self.processing_seconds,
                "speed_multiplier": self.speed_multiplier}


def timing_run(run: Callable[[], object], video_seconds: float, label: str = "") -> tuple[TimingRecord, object]:
    """Wall-clock ``run()`` end to end; returns the record and run's result."""
    t0 = time.perf_counter()
    result = run()
    return TimingRecord(video_seconds, time.perf_counter() - t0, label), result


@dataclass
class LineFit:
    slope: float
    intercept: float
    r2: float
    n: int = field(default=0)


def linear_fit(x, y) -> LineFit:
    """Ordinary least squares y = slope*x + intercept with the usual R^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise InputError("need at least two (x, y) points")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise InputError("x values are all equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LineFit(slope, intercept, r2, int(x.size))


def fit_records(records: Sequence[TimingRecord]) -> LineFit:
    return linear_fit([r.video_seconds for r in records], [r.processing_seconds for r in records])


def write_report(path, report: dict):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


PERF_COLUMNS = ["video", "duration", "time", "speed", "f1"]


def write_rows_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PERF_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
