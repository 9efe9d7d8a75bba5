"""Colour/edge pyramid descriptors and the column-per-frame matrix for change-point detection.

Each region of a two-level pyramid (whole frame plus its four quadrants)
contributes five L1-normalised histograms: H, S, V at 128 bins each, a
magnitude-weighted unsigned edge-orientation histogram and an edge-magnitude
histogram at 30 bins each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError
from .frame_quality import sobel
from .media_io import Frame, VideoSource, subsample, to_grayscale, to_hsv

HSV_BINS = 128
EDGE_BINS = 30
N_REGIONS = 5
REGION_DIM = 3 * HSV_BINS + 2 * EDGE_BINS
DESCRIPTOR_DIM = N_REGIONS * REGION_DIM  # 2220

# Sobel magnitude of a unit-range gray plane is bounded by 4*sqrt(2).
MAX_EDGE_MAGNITUDE = 4.0 * np.sqrt(2.0)
_EDGE_EPS = 1e-9


@dataclass
class FeatureMatrix:
    data: np.ndarray            # (d, n) float32
    frame_indices: list[int]
    analysis_rate: float

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def save(self, path):
        """Write ``<path>.f32`` (little-endian, column-major frames) and ``<path>.json``."""
        path = Path(path)
        blob = np.ascontiguousarray(self.data.T, dtype="<f4")
        path.with_suffix(".f32").write_bytes(blob.tobytes())
        sidecar = {"d": self.d, "n": self.n, "frame_indices": list(map(int, self.frame_indices)),
                   "analysis_rate": self.analysis_rate}
        path.with_suffix(".json").write_text(json.dumps(sidecar) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        path = Path(path)
        try:
            meta = json.loads(path.with_suffix(".json").read_text())
            raw = np.frombuffer(path.with_suffix(".f32").read_bytes(), dtype="<f4")
            data = raw.reshape(meta["n"], meta["d"]).T.astype(np.float32)
        except (OSError, ValueError, KeyError) as exc:
            raise FormatError(f"{path}: unreadable feature matrix ({exc})") from exc
        return cls(data, list(meta["frame_indices"]), float(meta["analysis_rate"]))


def _quadrant_ids(h: int, w: int) -> np.ndarray:
    rows = (np.arange(h) >= h // 2).astype(np.int64)
    cols = (np.arange(w) >= w // 2).astype(np.int64)
    return (2 * rows[:, None] + cols[None, :]).ravel()


def _pyramid_hist(quadrant: np.ndarray, bins: np.ndarray, n_bins: int,
                  weights: np.ndarray | None = None) -> np.ndarray:
    """Histogram per region: row 0 is the whole frame, rows 1-4 the quadrants."""
    flat = np.bincount(quadrant * n_bins + bins, weights=weights, minlength=4 * n_bins)
    quads = flat.reshape(4, n_bins).astype(np.float64)
    return np.vstack([quads.sum(axis=0), quads])


def _normalise_rows(h: np.ndarray) -> np.ndarray:
    total = h.sum(axis=1, keepdims=True)
    return np.divide(h, total, out=np.zeros_like(h), where=total > 0)


def frame_descriptor(frame: Frame) -> np.ndarray:
    """2220-dim descriptor, region-major: [whole, TL, TR, BL, BR] x [H, S, V, orient, mag]."""
    hsv = to_hsv(frame)
    h, w = hsv.shape[:2]
    quad = _quadrant_ids(h, w)

    hsv_flat = hsv.reshape(-1, 3)
    h_bin = np.minimum((hsv_flat[:, 0] * (HSV_BINS / 360.0)).astype(np.int64), HSV_BINS - 1)
    s_bin = np.minimum((hsv_flat[:, 1] * HSV_BINS).astype(np.int64), HSV_BINS - 1)
    v_bin = np.minimum((hsv_flat[:, 2] * HSV_BINS).astype(np.int64), HSV_BINS - 1)
    blocks = [
        _normalise_rows(_pyramid_hist(quad, h_bin, HSV_BINS)),
        _normalise_rows(_pyramid_hist(quad, s_bin, HSV_BINS)),
        _normalise_rows(_pyramid_hist(quad, v_bin, HSV_BINS)),
    ]

    if h >= 3 and w >= 3:
        gx, gy = sobel(to_grayscale(frame, "unit"))
        mag = np.hypot(gx, gy).ravel()
        theta = np.mod(np.degrees(np.arctan2(gy, gx)).ravel(), 180.0)
        o_bin = np.minimum((theta * (EDGE_BINS / 180.0)).astype(np.int64), EDGE_BINS - 1)
        m_bin = np.minimum((mag * (EDGE_BINS / MAX_EDGE_MAGNITUDE)).astype(np.int64), EDGE_BINS - 1)
        equad = _quadrant_ids(h, w).reshape(h, w)[1:-1, 1:-1].ravel()
        edge = (mag > _EDGE_EPS).astype(np.float64)
        blocks.append(_normalise_rows(_pyramid_hist(equad, o_bin, EDGE_BINS, weights=mag * edge)))
        blocks.append(_normalise_rows(_pyramid_hist(equad, m_bin, EDGE_BINS, weights=edge)))
    else:
        blocks.append(np.zeros((N_REGIONS, EDGE_BINS)))
        blocks.append(np.zeros((N_REGIONS, EDGE_BINS)))

    return np.hstack(blocks).ravel()


def descriptor_blocks(desc: np.ndarray) -> list[np.ndarray]:
    """Split a descriptor back into its 25 histogram blocks (5 regions x 5 histograms)."""
    sizes = [HSV_BINS] * 3 + [EDGE_BINS] * 2
    out, pos = [], 0
    for _ in range(N_REGIONS):
        for size in sizes:
            out.append(desc[pos:pos + size])
            pos += size
    return out


def matrix_from_descriptors(descriptors, frame_indices, analysis_rate: float) -> FeatureMatrix:
    descriptors = list(descriptors)
    if len(descriptors) < 2:
        raise DegenerateInputError(
            f"change-point detection needs at least 2 sampled frames, got {len(descriptors)}")
    data = np.stack(descriptors, axis=1).astype(np.float32)
    return FeatureMatrix(data, list(frame_indices), float(analysis_rate))


def build_matrix(source: VideoSource, analysis_rate: float = 2.0) -> FeatureMatrix:
    frames, index_map = subsample(source, analysis_rate)
    return matrix_from_descriptors((frame_descriptor(f) for f in frames), index_map, analysis_rate)
