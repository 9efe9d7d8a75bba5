"""Synthetic test videos with known scene boundaries and injected bad spans.

Each scene is a textured colour gradient with drifting rectangles in a
scene-specific palette.  Spans of dark, blurry or uniform frames can be
injected over the scene content.  Alongside the video the generator writes
``truth.json`` (boundaries, injected spans) and ``annotations.json`` (simulated
user summaries that favour high-interest scenes).

Scene spec (JSON)::

    {"width": 640, "height": 360, "fps": 24, "seed": 0, "format": "y4m",
     "scenes": [{"seconds": 20, "interest": 0.9}, ...],
     "inject": [{"kind": "dark", "start_seconds": 3.0, "seconds": 2.0}],
     "users": 5, "user_fraction": 0.15}
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .media_io import write_image_dir, write_y4m

BAD_KINDS = ("dark", "blurry", "uniform")


@dataclass
class SceneSpec:
    seconds: float
    interest: float = 0.5


@dataclass
class InjectSpec:
    kind: str
    start_seconds: float
    seconds: float


@dataclass
class SynthSpec:
    scenes: list[SceneSpec]
    width: int = 640
    height: int = 360
    fps: float = 24.0
    seed: int = 0
    format: str = "y4m"
    inject: list[InjectSpec] = field(default_factory=list)
    users: int = 5
    user_fraction: float = 0.15

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {"scenes", "width", "height", "fps", "seed", "format", "inject", "users",
                 "user_fraction"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        if not d.get("scenes"):
            raise ConfigError("synth spec needs at least one scene")
        scenes = [SceneSpec(**s) for s in d["scenes"]]
        inject = [InjectSpec(**j) for j in d.get("inject", [])]
        for j in inject:
            if j.kind not in BAD_KINDS:
                raise ConfigError(f"unknown injected span kind {j.kind!r}")
        rest = {k: v for k, v in d.items() if k not in ("scenes", "inject")}
        spec = cls(scenes=scenes, inject=inject, **rest)
        if spec.format not in ("y4m", "image_dir"):
            raise ConfigError(f"unknown synth format {spec.format!r}")
        if spec.width < 16 or spec.height < 16 or spec.fps <= 0:
            raise ConfigError("synth frames must be at least 16x16 with positive fps")
        return spec

    @classmethod
    def load(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def scene_bounds(self) -> list[tuple[int, int]]:
        bounds, pos = [], 0
        for sc in self.scenes:
            n = max(1, int(round(sc.seconds * self.fps)))
            bounds.append((pos, pos + n))
            pos += n
        return bounds

    @property
    def n_frames(self) -> int:
        return self.scene_bounds()[-1][1]

    def injected_spans(self) -> list[tuple[str, int, int]]:
        out = []
        for j in self.inject:
            a = int(round(j.start_seconds * self.fps))
            b = min(self.n_frames, a + int(round(j.seconds * self.fps)))
            if b > a:
                out.append((j.kind, a, b))
        return out


class _Scene:
    def __init__(self, rng: np.random.Generator, hue: float, h: int, w: int, n_noise: int = 3):
        self.h, self.w = h, w
        yy = np.linspace(0.0, 1.0, h)[:, None]
        xx = np.linspace(0.0, 1.0, w)[None, :]
        val = 0.30 + 0.55 * (0.6 * yy + 0.4 * xx)
        sat = 0.45 + 0.35 * xx * np.ones_like(yy)
        self.background = _hsv_plane(hue, sat, val)
        self.rects = []
        for _ in range(7):
            rh = int(rng.integers(h // 8, h // 3))
            rw = int(rng.integers(w // 10, w // 3))
            color = colorsys.hsv_to_rgb(((hue + rng.uniform(-40, 40)) % 360) / 360.0,
                                        rng.uniform(0.4, 1.0), rng.uniform(0.35, 1.0))
            self.rects.append((rng.uniform(0, h - rh), rng.uniform(0, w - rw), rh, rw,
                               rng.uniform(-1.2, 1.2), rng.uniform(-1.5, 1.5), np.array(color)))
        self.noise = [rng.normal(0.0, 7.0 / 255.0, size=(h, w, 1)) for _ in range(n_noise)]

    def clean(self, t: int) -> np.ndarray:
        img = self.background.copy()
        for y0, x0, rh, rw, vy, vx, color in self.rects:
            y = int(_bounce(y0 + vy * t, self.h - rh))
            x = int(_bounce(x0 + vx * t, self.w - rw))
            img[y:y + rh, x:x + rw] = color
        return img

    def render(self, t: int) -> np.ndarray:
        return self.clean(t) + self.noise[t % len(self.noise)]


def _bounce(pos: float, span: float) -> float:
    if span <= 0:
        return 0.0
    period = 2.0 * span
    p = pos % period
    return p if p <= span else period - p


def _hsv_plane(hue: float, sat, val) -> np.ndarray:
    sat, val = np.broadcast_arrays(np.asarray(sat, float), np.asarray(val, float))
    h6 = (hue % 360.0) / 60.0
    c = val * sat
    x = c * (1 - abs(h6 % 2 - 1))
    m = val - c
    i = int(h6) % 6
    order = [(c, x, 0), (x, c, 0), (0, x, c), (0, c, x), (x, 0, c), (c, 0, x)][i]
    return np.stack([np.broadcast_to(ch, val.shape) + m for ch in order], axis=-1)


def _blurry(img: np.ndarray) -> np.ndarray:
    # low-pass: heavy Gaussian blur and halved contrast around the mean
    out = ndimage.gaussian_filter(img, sigma=(10, 10, 0), mode="nearest")
    return 0.5 * out + 0.5 * out.mean(axis=(0, 1), keepdims=True)


def _dark(img: np.ndarray) -> np.ndarray:
    return img * 0.05


def _uniform(img: np.ndarray, rng_lines: np.ndarray) -> np.ndarray:
    base = img.mean(axis=(0, 1), keepdims=True)
    base = 0.35 + 0.3 * base / max(float(base.max()), 1e-6)
    out = np.broadcast_to(base, img.shape).copy()
    for r in rng_lines:
        out[int(r), :, :] = 0.0
        out[:, int(r * img.shape[1] / img.shape[0]), :] = 1.0
    return out


def render_frames(spec: SynthSpec) -> Iterator[np.ndarray]:
    """Yield uint8 RGB frames for the whole video."""
    rng = np.random.default_rng(spec.seed)
    offset = rng.uniform(0, 360)
    scenes = []
    for k, _ in enumerate(spec.scenes):
        hue = (offset + k * 137.508) % 360.0
        scenes.append(_Scene(np.random.default_rng([spec.seed, k]), hue, spec.height, spec.width))
    lines = np.random.default_rng([spec.seed, 999]).integers(0, spec.height, size=12)
    bad = np.full(spec.n_frames, "", dtype=object)
    for kind, a, b in spec.injected_spans():
        bad[a:b] = kind
    for k, (a, b) in enumerate(spec.scene_bounds()):
        scene = scenes[k]
        for fi in range(a, b):
            t = fi - a
            kind = bad[fi]
            if kind == "blurry":
                img = _blurry(scene.clean(t))
            elif kind == "dark":
                img = _dark(scene.render(t))
            elif kind == "uniform":
                img = _uniform(scene.clean(t), lines)
            else:
                img = scene.render(t)
            yield np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def simulated_annotations(spec: SynthSpec) -> dict:
    """User summaries: 2-second clips drawn from scenes in proportion to interest."""
    n = spec.n_frames
    bounds = spec.scene_bounds()
    weights = np.array([max(sc.interest, 0.0) for sc in spec.scenes], dtype=float)
    if weights.sum() == 0:
        weights = np.ones_like(weights)
    budget = int(spec.user_fraction * n)
    # short videos: a clip never exceeds the whole budget
    clip = max(1, min(int(round(2.0 * spec.fps)), budget))
    bad = np.zeros(n, dtype=bool)
    for _, a, b in spec.injected_spans():
        bad[a:b] = True
    users = []
    for u in range(spec.users):
        rng = np.random.default_rng([spec.seed, 7919, u])
        mask = np.zeros(n, dtype=bool)
        for _ in range(200):
            if mask.sum() + clip > budget:
                break
            k = rng.choice(len(bounds), p=weights / weights.sum())
            a, b = bounds[k]
            if b - a <= clip:
                start = a
            else:
                start = int(rng.integers(a, b - clip))
            seg = slice(start, min(start + clip, b))
            if bad[seg].any():
                continue
            mask[seg] = True
        users.append(_mask_to_intervals(mask))
    return {"n_frames": n, "users": users}


def _mask_to_intervals(mask: np.ndarray) -> list[list[int]]:
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return [[int(a), int(b)] for a, b in zip(starts, ends)]


def generate(spec: SynthSpec, out_dir) -> dict:
    """Write video + truth.json + annotations.json into ``out_dir``; returns the truth dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if spec.format == "y4m":
        video = out / "video.y4m"
        write_y4m(video, render_frames(spec), spec.fps)
    else:
        video = out / "frames"
        write_image_dir(video, render_frames(spec), spec.fps)
    bounds = spec.scene_bounds()
    truth = {
        "video": video.name,
        "format": spec.format,
        "fps": spec.fps,
        "n_frames": spec.n_frames,
        "width": spec.width,
        "height": spec.height,
        "boundaries": [a for a, _ in bounds[1:]],
        "scenes": [{"start": a, "end": b, "interest": sc.interest}
                   for (a, b), sc in zip(bounds, spec.scenes)],
        "injected": [{"kind": k, "start": a, "end": b} for k, a, b in spec.injected_spans()],
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    (out / "annotations.json").write_text(json.dumps(simulated_annotations(spec)) + "\n")
    return truth
