"""Codec-free frame sources (image directories, raw Y4M) and colour helpers.

Frames carry RGB planes as float64 in [0, 1].  Sources decode lazily, one
frame at a time, so a worker never holds more than the frame it is
currently processing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import FormatError, InputError, UnsupportedFormatError

LUMA_COEFFS = np.array([0.2126, 0.7152, 0.0722])

Y4M_MAGIC = b"YUV4MPEG2"
_Y4M_420 = {"420", "420jpeg", "420mpeg2", "420paldv"}
_Y4M_444 = {"444"}


@dataclass(frozen=True)
class Frame:
    index: int
    rgb: np.ndarray
    fps: float = 1.0

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] * rgb.shape[1] == 0:
            raise InputError(f"frame must be a non-empty HxWx3 array, got {rgb.shape}")
        if rgb is self.rgb and rgb.flags.writeable:
            rgb = rgb.copy()
        rgb.flags.writeable = False
        object.__setattr__(self, "rgb", rgb)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def timestamp(self) -> float:
        return self.index / self.fps

    @classmethod
    def from_bytes(cls, index: int, rgb8: np.ndarray, fps: float = 1.0) -> "Frame":
        return cls._owned(index, np.asarray(rgb8, dtype=np.float64) / 255.0, fps)

    @classmethod
    def _owned(cls, index: int, rgb: np.ndarray, fps: float) -> "Frame":
        # rgb is a fresh float64 array nobody else holds: freeze it without copying
        rgb.flags.writeable = False
        return cls(index, rgb, fps)


def _rgb(frame) -> np.ndarray:
    return frame.rgb if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)


def to_grayscale(frame, range: str = "unit") -> np.ndarray:
    """Rec.709 luma plane; ``range='byte'`` scales it to [0, 255]."""
    gray = _rgb(frame) @ LUMA_COEFFS
    if range == "byte":
        return gray * 255.0
    if range != "unit":
        raise InputError(f"unknown grayscale range {range!r}")
    return gray


def to_hsv(frame) -> np.ndarray:
    """Hexcone RGB -> HSV with H in degrees [0, 360) and S, V in [0, 1].

    Achromatic pixels get H = 0; black pixels get S = 0.
    """
    rgb = _rgb(frame)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.maximum(np.maximum(r, g), b)
    c = v - np.minimum(np.minimum(r, g), b)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        np.mod((g - b) / safe_c, 6.0),
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return np.stack([h, s, v], axis=-1)


def downscale(frame: Frame, max_width: int | None) -> Frame:
    """Block-average by the largest integer factor keeping width >= max_width."""
    if not max_width or frame.width <= max_width:
        return frame
    k = frame.width // max_width
    if k <= 1:
        return frame
    h, w = (frame.height // k) * k, (frame.width // k) * k
    src = frame.rgb[:h, :w]
    acc = np.zeros((h // k, w // k, 3))
    for dy in range(k):
        for dx in range(k):
            acc += src[dy::k, dx::k]
    acc /= k * k
    return Frame._owned(frame.index, acc, frame.fps)


# -- YUV <-> RGB (BT.601 full range, as used by C420jpeg) ---------------------

def rgb_to_yuv601(rgb8: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rgb = np.asarray(rgb8, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return y, cb, cr


def yuv601_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    """Returns float RGB in [0, 1], quantized to 8-bit levels like any decoder output."""
    y = y.astype(np.float64)
    cb = cb.astype(np.float64) - 128.0
    cr = cr.astype(np.float64) - 128.0
    rgb = np.empty(y.shape + (3,))
    rgb[..., 0] = y + 1.402 * cr
    rgb[..., 1] = y - 0.344136 * cb - 0.714136 * cr
    rgb[..., 2] = y + 1.772 * cb
    np.rint(rgb, out=rgb)
    np.clip(rgb, 0.0, 255.0, out=rgb)
    rgb /= 255.0
    return rgb


def _to_u8(plane: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(plane), 0, 255).astype(np.uint8)


# -- sources ----------------------------------------------------------------

class VideoSource:
    """Sequential reader over a fixed number of frames at a fixed rate."""

    kind = "abstract"

    def __init__(self, fps: float, n_frames: int, width: int, height: int, provenance: str):
        if not fps > 0:
            raise FormatError(f"fps must be positive, got {fps}")
        if n_frames < 1:
            raise FormatError("source contains no frames")
        self.fps = float(fps)
        self.n_frames = int(n_frames)
        self.width = int(width)
        self.height = int(height)
        self.provenance = provenance

    @property
    def duration(self) -> float:
        return self.n_frames / self.fps

    def read(self, index: int) -> Frame:
        raise NotImplementedError

    def frames(self, indices: Iterable[int] | None = None) -> Iterator[Frame]:
        if indices is None:
            indices = range(self.n_frames)
        last = -1
        for i in indices:
            if i <= last:
                raise InputError("frames must be requested in strictly increasing order")
            last = i
            yield self.read(i)

    def __iter__(self) -> Iterator[Frame]:
        return self.frames()

    def __len__(self) -> int:
        return self.n_frames

    def descriptor(self) -> tuple[str, str]:
        """(kind, path) pair from which a worker process can reopen the source."""
        return self.kind, self.provenance

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ArraySource(VideoSource):
    """In-memory source over a stack of RGB frames; used by tests and synth."""

    kind = "array"

    def __init__(self, frames: Sequence[np.ndarray], fps: float):
        frames = list(frames)
        if not frames:
            raise FormatError("source contains no frames")
        h, w = np.asarray(frames[0]).shape[:2]
        super().__init__(fps, len(frames), w, h, "<memory>")
        self._frames = frames

    def read(self, index: int) -> Frame:
        if not 0 <= index < self.n_frames:
            raise IndexError(index)
        arr = np.asarray(self._frames[index])
        if arr.dtype == np.uint8:
            return Frame.from_bytes(index, arr, self.fps)
        return Frame(index, arr, self.fps)


class ImageDirSource(VideoSource):
    """Numbered PPM/PNG frames described by a ``frames.json`` file."""

    kind = "image_dir"
    METADATA = "frames.json"

    def __init__(self, path):
        root = Path(path)
        meta_path = root / self.METADATA
        if not meta_path.is_file():
            raise FormatError(f"{root}: missing {self.METADATA}")
        try:
            meta = json.loads(meta_path.read_text())
            fps = float(meta["fps"])
            count = int(meta["count"])
            pattern = str(meta["pattern"])
            width, height = int(meta["width"]), int(meta["height"])
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{meta_path}: bad metadata ({exc})") from exc
        self.start = int(meta.get("start", 0))
        self.pattern = pattern
        self.root = root
        super().__init__(fps, count, width, height, str(root))
        if not self._path(0).is_file():
            raise FormatError(f"{root}: first frame {self._path(0).name} not found")

    def _path(self, index: int) -> Path:
        return self.root / (self.pattern % (index + self.start))

    def read(self, index: int) -> Frame:
        if not 0 <= index < self.n_frames:
            raise IndexError(index)
        path = self._path(index)
        try:
            with Image.open(path) as im:
                rgb8 = np.asarray(im.convert("RGB"))
        except (OSError, ValueError) as exc:
            raise FormatError(f"{path}: cannot decode ({exc})") from exc
        if rgb8.shape[:2] != (self.height, self.width):
            raise FormatError(f"{path}: size {rgb8.shape[1]}x{rgb8.shape[0]} "
                              f"differs from metadata {self.width}x{self.height}")
        return Frame.from_bytes(index, rgb8, self.fps)


def parse_y4m_header(line: bytes) -> dict:
    """Parse the stream header line (without the trailing newline)."""
    tokens = line.split(b" ")
    if not tokens or tokens[0] != Y4M_MAGIC:
        raise FormatError("not a YUV4MPEG2 stream")
    info = {"colorspace": "420jpeg", "interlace": "p", "aspect": "0:0", "fps": None}
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii", "replace")
        try:
            if key == "W":
                info["width"] = int(val)
            elif key == "H":
                info["height"] = int(val)
            elif key == "F":
                num, den = val.split(":")
                info["fps"] = int(num) / int(den)
            elif key == "C":
                info["colorspace"] = val
            elif key == "I":
                info["interlace"] = val
            elif key == "A":
                info["aspect"] = val
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad Y4M header token {tok!r}") from exc
    for required in ("width", "height", "fps"):
        if info.get(required) is None:
            raise FormatError(f"Y4M header lacks {required}")
    if info["width"] <= 0 or info["height"] <= 0 or not info["fps"] > 0:
        raise FormatError("Y4M header has non-positive dimensions or rate")
    return info


class Y4MSource(VideoSource):
    """Uncompressed YUV4MPEG2 stream, 8-bit 4:2:0 or 4:4:4."""

    kind = "y4m"

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise FormatError(f"{path}: no such file")
        self._fh = open(self.path, "rb")
        header = self._fh.readline(4096)
        if not header.endswith(b"\n"):
            self._fh.close()
            raise FormatError(f"{path}: truncated Y4M header")
        try:
            info = parse_y4m_header(header.rstrip(b"\n"))
        except FormatError:
            self._fh.close()
            raise
        cs = info["colorspace"]
        w, h = info["width"], info["height"]
        if cs in _Y4M_420:
            self._chroma = ((h + 1) // 2, (w + 1) // 2)
        elif cs in _Y4M_444:
            self._chroma = (h, w)
        else:
            self._fh.close()
            raise UnsupportedFormatError(f"{path}: unsupported Y4M colorspace C{cs}")
        self.colorspace = cs
        self._luma_size = w * h
        self._frame_bytes = w * h + 2 * self._chroma[0] * self._chroma[1]
        self._offsets = self._scan(len(header))
        super().__init__(info["fps"], len(self._offsets), w, h, str(self.path))

    def _scan(self, pos: int) -> list[int]:
        offsets = []
        size = os.fstat(self._fh.fileno()).st_size
        fh = self._fh
        while pos < size:
            fh.seek(pos)
            line = fh.readline(1024)
            if not line.startswith(b"FRAME") or not line.endswith(b"\n"):
                raise FormatError(f"{self.path}: bad frame header at byte {pos}")
            data_at = pos + len(line)
            if data_at + self._frame_bytes > size:
                raise FormatError(f"{self.path}: truncated frame {len(offsets)}")
            offsets.append(data_at)
            pos = data_at + self._frame_bytes
        return offsets

    def read_planes(self, index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not 0 <= index < len(self._offsets):
            raise IndexError(index)
        self._fh.seek(self._offsets[index])
        buf = self._fh.read(self._frame_bytes)
        if len(buf) != self._frame_bytes:
            raise FormatError(f"{self.path}: short read on frame {index}")
        data = np.frombuffer(buf, dtype=np.uint8)
        n = self._luma_size
        ch, cw = self._chroma
        m = ch * cw
        y = data[:n].reshape(self.height, self.width)
        u = data[n:n + m].reshape(ch, cw)
        v = data[n + m:n + 2 * m].reshape(ch, cw)
        return y, u, v

    def read(self, index: int) -> Frame:
        y, u, v = self.read_planes(index)
        if self._chroma != (self.height, self.width):
            u = u.repeat(2, axis=0).repeat(2, axis=1)[: self.height, : self.width]
            v = v.repeat(2, axis=0).repeat(2, axis=1)[: self.height, : self.width]
        return Frame._owned(index, yuv601_to_rgb(y, u, v), self.fps)

    def close(self):
        self._fh.close()


def open_source(path, kind: str | None = None) -> VideoSource:
    """Open an image directory or a Y4M file; ``kind`` is inferred when omitted."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: does not exist")
    if kind is None:
        kind = "image_dir" if path.is_dir() else "y4m"
    if kind == "image_dir":
        return ImageDirSource(path)
    if kind == "y4m":
        return Y4MSource(path)
    raise InputError(f"unknown source kind {kind!r}")


# -- subsampling -------------------------------------------------------------

def subsample_stride(fps: float, target_rate: float) -> int:
    if not 0 < target_rate <= fps:
        raise InputError(f"target rate must lie in (0, fps={fps}], got {target_rate}")
    return max(1, int(round(fps / target_rate)))


def subsample_indices(n_frames: int, fps: float, target_rate: float) -> list[int]:
    return list(range(0, n_frames, subsample_stride(fps, target_rate)))


def subsample(source: VideoSource, target_rate: float) -> tuple[Iterator[Frame], list[int]]:
    """Frames at stride round(fps/target_rate) plus the map back to full-rate indices."""
    index_map = subsample_indices(source.n_frames, source.fps, target_rate)
    return source.frames(index_map), index_map


# -- writers (used by the synthetic generator and tests) ---------------------

def write_y4m(path, frames: Iterable[np.ndarray], fps: float, colorspace: str = "420jpeg"):
    """Encode uint8 RGB frames as a Y4M stream; returns the frame count."""
    if colorspace not in _Y4M_420 | _Y4M_444:
        raise UnsupportedFormatError(f"cannot write colorspace C{colorspace}")
    num, den = _rate_fraction(fps)
    count = 0
    with open(path, "wb") as fh:
        header_written = False
        for rgb8 in frames:
            rgb8 = np.asarray(rgb8)
            h, w = rgb8.shape[:2]
            if not header_written:
                fh.write(f"YUV4MPEG2 W{w} H{h} F{num}:{den} Ip A1:1 C{colorspace}\n".encode())
                header_written = True
            y, cb, cr = rgb_to_yuv601(rgb8)
            if colorspace in _Y4M_420:
                cb, cr = _halve(cb), _halve(cr)
            fh.write(b"FRAME\n")
            fh.write(_to_u8(y).tobytes())
            fh.write(_to_u8(cb).tobytes())
            fh.write(_to_u8(cr).tobytes())
            count += 1
    return count


def _halve(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    ph, pw = h + (h & 1), w + (w & 1)
    if (ph, pw) != (h, w):
        plane = np.pad(plane, ((0, ph - h), (0, pw - w)), mode="edge")
    return plane.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3))


def _rate_fraction(fps: float) -> tuple[int, int]:
    if float(fps).is_integer():
        return int(fps), 1
    from fractions import Fraction

    frac = Fraction(fps).limit_denominator(1001)
    return frac.numerator, frac.denominator


def write_image_dir(path, frames: Iterable[np.ndarray], fps: float,
                    pattern: str = "frame_%06d.ppm") -> int:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    count, size = 0, None
    for rgb8 in frames:
        rgb8 = np.asarray(rgb8, dtype=np.uint8)
        size = rgb8.shape[:2]
        Image.fromarray(rgb8, "RGB").save(root / (pattern % count))
        count += 1
    if size is None:
        raise InputError("no frames to write")
    meta = {"fps": fps, "width": size[1], "height": size[0], "pattern": pattern, "count": count}
    (root / ImageDirSource.METADATA).write_text(json.dumps(meta, indent=2) + "\n")
    return count
