"""End-to-end stages with content-hash caching and a process pool for frame work.

Pass one reads every frame for the quality scores and the sampled frames for
the segmentation descriptor.  Pass two computes aesthetics only for frames
that survive segmentation.  Per-frame work is split into contiguous chunks;
each worker reopens the video from its (kind, path) descriptor and results are
joined in frame order, so the pool width never changes the output.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import changepoint
from .aesthetics import AESTHETIC_DIM, assemble_frame_vector, aesthetic_features
from .clustering import counts_from_embeddings, read_embeddings_csv
from .config import PipelineConfig
from .errors import InputError, StageError, VidsumError
from .frame_quality import QualityScores, QualityThresholds, assess, label
from .media_io import ArraySource, VideoSource, downscale, open_source, subsample_stride
from .ranker import TreeModel, predict_bit
from .seg_features import DESCRIPTOR_DIM, FeatureMatrix, frame_descriptor
from .segmentation import Segmentation, apply_splits, post_process_short_segments, refine_by_quality
from .summarize import RankedSegment, Summary, aggregate, summarize_ranked

log = logging.getLogger("vidsum")
CACHE_VERSION = "1"


# -- hashing and cache files ------------------------------------------------------

def content_hash(source: VideoSource) -> str:
    h = hashlib.sha256()
    h.update(f"{source.kind}:{source.fps}:{source.n_frames}".encode())
    if isinstance(source, ArraySource):
        for i in range(source.n_frames):
            h.update(np.ascontiguousarray(source.read(i).rgb).tobytes())
        return h.hexdigest()
    path = Path(source.provenance)
    files = sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path]
    for p in files:
        h.update(p.name.encode())
        with open(p, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
    return h.hexdigest()


def _key(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:16]


def _atomic_write(path: Path, write):
    """``write(tmp_path)`` then rename, so a crash never leaves a partial cache file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


class Cache:
    def __init__(self, root: Path | None, video_hash: str):
        self.dir = Path(root) / video_hash[:16] if root is not None else None

    def path(self, name: str) -> Path | None:
        return self.dir / name if self.dir is not None else None

    def load_npz(self, name: str) -> dict | None:
        p = self.path(name)
        if p is None or not p.exists():
            return None
        try:
            with np.load(p, allow_pickle=False) as z:
                return {k: z[k] for k in z.files}
        except (OSError, ValueError, KeyError):
            log.warning("ignoring unreadable cache file %s", p)
            return None

    def save_npz(self, name: str, **arrays):
        p = self.path(name)
        if p is not None:
            _atomic_write(p, lambda tmp: _savez(tmp, arrays))

    def load_json(self, name: str) -> dict | None:
        p = self.path(name)
        if p is None or not p.exists():
            return None
        try:
            return json.loads(p.read_text())
        except (OSError, ValueError):
            log.warning("ignoring unreadable cache file %s", p)
            return None

    def save_json(self, name: str, doc: dict):
        p = self.path(name)
        if p is not None:
            _atomic_write(p, lambda tmp: Path(tmp).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n"))


def _savez(tmp: str, arrays: dict):
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)


# -- worker pool ----------------------------------------------------------------------

def _chunks(items: list[int], width: int) -> list[list[int]]:
    if not items:
        return []
    n_chunks = min(len(items), max(1, 4 * width))
    return [c.tolist() for c in np.array_split(np.asarray(items, dtype=np.int64), n_chunks) if len(c)]


def _map_frames(source: VideoSource, fn, indices: list[int], width: int, *args) -> list:
    """Apply ``fn(source, chunk, *args)`` over contiguous chunks; results in frame order."""
    chunks = _chunks(indices, width)
    if width <= 1 or len(chunks) <= 1 or isinstance(source, ArraySource):
        return [r for c in chunks for r in fn(source, c, *args)]
    desc = source.descriptor()
    with ProcessPoolExecutor(max_workers=width) as pool:
        futures = [pool.submit(_reopen_and_run, desc, fn, c, args) for c in chunks]
        return [r for f in futures for r in f.result()]


def _reopen_and_run(desc, fn, chunk, args):
    kind, path = desc
    with open_source(path, kind) as src:
        return fn(src, chunk, *args)


def _analyse_chunk(source: VideoSource, chunk: list[int], stride: int) -> list:
    out = []
    for frame in source.frames(chunk):
        q = assess(frame)
        desc = frame_descriptor(frame) if frame.index % stride == 0 else None
        out.append((q.y, q.s, q.u, desc))
    return out


def _aesthetic_chunk(source: VideoSource, chunk: list[int], width: int) -> list:
    return [aesthetic_features(downscale(f, width or None)) for f in source.frames(chunk)]


# -- stages ----------------------------------------------------------------------------

@dataclass
class Analysis:
    scores: np.ndarray        # (n, 3) y, s, u
    matrix: FeatureMatrix

    def labels(self, thresholds: QualityThresholds) -> list[str]:
        return [label(QualityScores(y, s, u, ""), thresholds) for y, s, u in self.scores.tolist()]


@dataclass
class PipelineResult:
    n_frames: int
    fps: float
    segmentation: Segmentation
    ranked: list[RankedSegment] = field(default_factory=list)
    summary: Summary | None = None
    labels: list[str] = field(default_factory=list)
    stage_log: list[tuple[str, str]] = field(default_factory=list)


class Pipeline:
    def __init__(self, source: VideoSource, cfg: PipelineConfig, cache_root=None):
        self.source = source
        self.cfg = cfg
        self.width = cfg.n_workers
        self.stage_log: list[tuple[str, str]] = []
        root = cache_root if cfg.cache else None
        self.cache = Cache(root, content_hash(source) if root is not None else "")

    def _note(self, stage: str, status: str):
        self.stage_log.append((stage, status))
        log.info("stage %s: %s", stage, status)

    def _stage(self, name: str, fn, *args):
        try:
            return fn(*args)
        except StageError:
            raise
        except VidsumError as exc:
            raise StageError(name, exc) from exc
        except Exception as exc:  # surfaced with the stage name, mapped to exit 4
            raise StageError(name, exc) from exc

    # pass one
    def analysis(self) -> Analysis:
        return self._stage("analysis", self._analysis)

    def _analysis(self) -> Analysis:
        src, cfg = self.source, self.cfg
        stride = subsample_stride(src.fps, min(cfg.analysis_rate, src.fps))
        name = f"analysis-{_key(CACHE_VERSION, stride)}.npz"
        hit = self.cache.load_npz(name)
        if hit is not None and hit["scores"].shape == (src.n_frames, 3):
            self._note("analysis", "cached")
            fm = FeatureMatrix(hit["descriptors"].T, hit["frame_indices"].tolist(), float(hit["rate"]))
            return Analysis(hit["scores"], fm)
        rows = _map_frames(src, _analyse_chunk, list(range(src.n_frames)), self.width, stride)
        scores = np.array([r[:3] for r in rows], dtype=np.float64)
        idx = [i for i, r in enumerate(rows) if r[3] is not None]
        desc = np.array([rows[i][3] for i in idx], dtype=np.float32).reshape(len(idx), DESCRIPTOR_DIM)
        rate = src.fps / stride
        self.cache.save_npz(name, scores=scores, descriptors=desc, frame_indices=np.array(idx), rate=rate)
        self._note("analysis", "computed")
        return Analysis(scores, FeatureMatrix(desc.T, idx, rate))

    def segmentation(self, analysis: Analysis | None = None) -> tuple[Segmentation, list[str]]:
        analysis = analysis or self.analysis()
        return self._stage("segmentation", self._segmentation, analysis)

    def _segmentation(self, analysis: Analysis) -> tuple[Segmentation, list[str]]:
        src, cfg = self.source, self.cfg
        thresholds = QualityThresholds(cfg.y_min, cfg.s_min, cfg.u_min)
        labels = analysis.labels(thresholds)
        fm = analysis.matrix
        splits: list[int] = []
        if fm.data.shape[1] >= 2:
            sol = changepoint.solve(fm, cfg.lam or None, cfg.solver_tol, cfg.solver_max_iter, cfg.lambda_ratio)
            k = changepoint.target_split_count(src.n_frames, src.fps, cfg.target_segment_seconds)
            chosen = changepoint.select_splits(changepoint.boundary_scores(sol), k, cfg.split_gap,
                                               exclude_first=True)
            splits = [int(fm.frame_indices[c]) for c in chosen.splits]
        seg = apply_splits(src.n_frames, splits, src.fps)
        seg = refine_by_quality(seg, labels, cfg.discard_fraction, cfg.frames(cfg.max_bad_run_seconds, src.fps))
        seg = post_process_short_segments(seg, cfg.frames(cfg.d_m_seconds, src.fps),
                                          cfg.frames(cfg.d_b_seconds, src.fps))
        self._note("segmentation", "computed")
        return seg, labels

    # pass two
    def feature_frames(self, seg: Segmentation) -> list[int]:
        step = self.cfg.feature_stride
        return sorted({i for s in seg.segments for i in range(s.start, s.end, step)})

    def aesthetic_block(self, indices: list[int]) -> dict[int, np.ndarray]:
        return self._stage("features", self._aesthetic_block, indices)

    def _aesthetic_block(self, indices: list[int]) -> dict[int, np.ndarray]:
        name = f"aesthetic-{_key(CACHE_VERSION, self.cfg.feature_width)}.npz"
        known: dict[int, np.ndarray] = {}
        hit = self.cache.load_npz(name)
        if hit is not None and hit["vectors"].shape[1:] == (AESTHETIC_DIM,):
            known = {int(i): v for i, v in zip(hit["indices"], hit["vectors"])}
        missing = [i for i in indices if i not in known]
        if missing:
            vecs = _map_frames(self.source, _aesthetic_chunk, missing, self.width, self.cfg.feature_width)
            known.update(zip(missing, vecs))
            order = sorted(known)
            self.cache.save_npz(name, indices=np.array(order, dtype=np.int64),
                                vectors=np.array([known[i] for i in order]).reshape(len(order), AESTHETIC_DIM))
            self._note("features", f"computed {len(missing)} frames")
        else:
            self._note("features", "cached")
        return {i: known[i] for i in indices}

    def frame_vectors(self, indices: list[int]) -> dict[int, np.ndarray]:
        blocks = self.aesthetic_block(indices)
        return self._stage("frame_vectors", self._frame_vectors, blocks)

    def _frame_vectors(self, blocks: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        cfg, n = self.cfg, self.source.n_frames
        faces = np.zeros((n, 2), dtype=np.int64)
        if cfg.embeddings:
            emb = read_embeddings_csv(cfg.embeddings)
            faces = counts_from_embeddings(emb, n, cfg.tau, cfg.salience_min or None, cfg.seed)
        order = sorted(blocks)
        bits = np.zeros(len(order), dtype=np.int64)
        if cfg.bit_model and order:
            bit_model = TreeModel.load(cfg.bit_model)
            bits = predict_bit(bit_model, np.array([blocks[i] for i in order]))
        return {i: assemble_frame_vector(blocks[i], int(faces[i, 0]), int(faces[i, 1]), int(b))
                for i, b in zip(order, bits)}

    def segment_features(self, seg: Segmentation) -> np.ndarray:
        fv = self.frame_vectors(self.feature_frames(seg))
        step = self.cfg.feature_stride
        rows = [aggregate(np.array([fv[i] for i in range(s.start, s.end, step)]), self.cfg.exclude_faces)
                for s in seg.segments]
        dim = 120 if self.cfg.exclude_faces else 124
        return np.array(rows).reshape(len(rows), dim)

    def rank(self, seg: Segmentation, model: TreeModel) -> list[RankedSegment]:
        feats = self.segment_features(seg)
        return self._stage("ranking", self._rank, seg, feats, model)

    def _rank(self, seg, feats, model) -> list[RankedSegment]:
        if feats.shape[1] != model.n_features:
            raise InputError(f"model expects {model.n_features} features, segments have {feats.shape[1]}")
        ranks = model.predict(feats) if len(feats) else np.zeros(0)
        ranked = [RankedSegment(s, float(r)) for s, r in zip(seg.segments, ranks)]
        self.cache.save_json(f"ranks-{_key(CACHE_VERSION, self.cfg.to_dict(), model.dumps())}.json",
                             {"segments": [{"start": r.segment.start, "end": r.segment.end, "rank": r.rank}
                                           for r in ranked]})
        self._note("ranking", "computed")
        return ranked

    def summarize(self, model: TreeModel) -> PipelineResult:
        analysis = self.analysis()
        seg, labels = self.segmentation(analysis)
        ranked = self.rank(seg, model)
        src, cfg = self.source, self.cfg
        summary = self._stage("selection", summarize_ranked, ranked, src.n_frames, src.fps, cfg.fraction,
                              cfg.coarsen)
        self._note("selection", "computed")
        return PipelineResult(src.n_frames, src.fps, seg, ranked, summary, labels, self.stage_log)


def load_model(path) -> TreeModel:
    if not path:
        raise InputError("a ranking model is required (set 'model' or pass --model)")
    return TreeModel.load(path)
