"""Chinese-whispers clustering of face embeddings and per-frame face counts.

Face detection and embedding extraction happen elsewhere; embeddings arrive
as CSV rows ``frame_index,e0..e127``.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InputError

DEFAULT_TAU = 0.6


@dataclass
class EmbeddingSet:
    vectors: np.ndarray   # (m, dim)
    frame_of: np.ndarray  # (m,) int

    def __post_init__(self):
        self.frame_of = np.asarray(self.frame_of, dtype=np.int64).ravel()
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(vectors) != len(self.frame_of):
            raise InputError(f"{len(self.frame_of)} frame indices for vectors of shape {vectors.shape}")
        self.vectors = vectors

    def __len__(self) -> int:
        return len(self.frame_of)

    @classmethod
    def empty(cls, dim: int = 128) -> "EmbeddingSet":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int64))


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    iterations: int

    @property
    def sizes(self) -> dict[int, int]:
        return dict(sorted(Counter(self.labels.tolist()).items()))

    def salient_clusters(self, salience_min: int) -> set[int]:
        return {lab for lab, n in self.sizes.items() if n >= salience_min}

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)


def build_graph(emb, tau: float = DEFAULT_TAU, block: int = 256) -> list[np.ndarray]:
    """Adjacency lists: an edge joins a != b whose Euclidean distance is < tau."""
    if tau < 0:
        raise InputError("tau must be non-negative")
    X = emb.vectors if isinstance(emb, EmbeddingSet) else np.asarray(emb, dtype=np.float64)
    m = len(X)
    sq = np.einsum("ij,ij->i", X, X)
    adj: list[list[np.ndarray]] = [[] for _ in range(m)]
    for lo in range(0, m, block):
        hi = min(m, lo + block)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        close = d2 < tau * tau
        for r in range(hi - lo):
            row = np.flatnonzero(close[r])
            adj[lo + r].append(row[row != lo + r])
    return [np.concatenate(a) if a else np.zeros(0, dtype=np.int64) for a in adj]


def chinese_whispers(adjacency: list[np.ndarray], max_iters: int = 20, seed: int = 0) -> ClusterAssignment:
    """Nodes start in singleton classes and repeatedly adopt their neighbours' majority class.

    Visit order is a fresh seeded permutation per pass; ties go to the
    smallest class id.  Stops after a pass without changes.
    """
    m = len(adjacency)
    labels = np.arange(m)
    rng = np.random.default_rng(seed)
    it = 0
    for it in range(1, max_iters + 1):
        changed = False
        for node in rng.permutation(m):
            neigh = adjacency[node]
            if len(neigh) == 0:
                continue
            counts = np.bincount(labels[neigh])
            best = int(np.argmax(counts))
            if best != labels[node]:
                labels[node] = best
                changed = True
        if not changed:
            break
    return ClusterAssignment(labels, it)


def default_salience_min(n_embeddings: int) -> int:
    return max(2, int(np.ceil(0.01 * n_embeddings)))


def face_counts(assignment: ClusterAssignment, emb: EmbeddingSet, n_frames: int,
                salience_min: int | None = None) -> np.ndarray:
    """(n_frames, 2) array of (faces, salient faces) per frame."""
    if salience_min is None:
        salience_min = default_salience_min(len(emb))
    out = np.zeros((n_frames, 2), dtype=np.int64)
    if len(emb) == 0:
        return out
    salient = assignment.salient_clusters(salience_min)
    is_salient = np.array([lab in salient for lab in assignment.labels.tolist()], dtype=np.int64)
    np.add.at(out[:, 0], emb.frame_of, 1)
    np.add.at(out[:, 1], emb.frame_of, is_salient)
    return out


def read_embeddings_csv(path) -> EmbeddingSet:
    frames, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "frame_index":
            raise FormatError(f"{path}: expected a 'frame_index,e0,...' header")
        for row in reader:
            if not row:
                continue
            frames.append(int(row[0]))
            rows.append([float(v) for v in row[1:]])
    dim = len(header) - 1
    return EmbeddingSet(np.array(rows, dtype=np.float64).reshape(len(rows), dim), np.array(frames))


def write_embeddings_csv(path, emb: EmbeddingSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index"] + [f"e{i}" for i in range(emb.vectors.shape[1])])
        for f, v in zip(emb.frame_of, emb.vectors):
            w.writerow([int(f)] + [repr(float(x)) for x in v])


def counts_from_embeddings(emb: EmbeddingSet, n_frames: int, tau: float = DEFAULT_TAU,
                           salience_min: int | None = None, seed: int = 0) -> np.ndarray:
    if len(emb) == 0:
        return np.zeros((n_frames, 2), dtype=np.int64)
    if emb.frame_of.min() < 0 or emb.frame_of.max() >= n_frames:
        raise InputError("embedding frame index outside the video")
    assignment = chinese_whispers(build_graph(emb, tau), seed=seed)
    return face_counts(assignment, emb, n_frames, salience_min)
