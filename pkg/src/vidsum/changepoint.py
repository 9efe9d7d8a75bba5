"""Group-lasso self-representation and split-point selection.

Solves

    min_A  ||X - X A||_F^2 + (lam / 2) * sum_i ||A[i, :]||_2

with accelerated proximal gradient (FISTA), restarting momentum whenever a
step would raise the objective.  Everything is expressed through the Gram
matrix G = X^T X, so an iteration costs O(n^3) regardless of descriptor
length.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class LassoSolution:
    coeffs: np.ndarray
    objective_trace: list[float]
    lam: float
    iterations: int
    converged: bool
    lam_max: float = float("nan")


@dataclass
class SplitSet:
    splits: list[int]
    scores: np.ndarray = field(repr=False)


def group_lasso_prox(row: np.ndarray, threshold: float) -> np.ndarray:
    """Block soft-threshold: ``row * max(0, 1 - t / ||row||)``."""
    if threshold < 0:
        raise InputError("threshold must be non-negative")
    row = np.asarray(row, dtype=np.float64)
    norm = np.linalg.norm(row)
    if norm <= threshold:
        return np.zeros_like(row)
    return row * (1.0 - threshold / norm)


def _prox_rows(M: np.ndarray, threshold: float) -> np.ndarray:
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    scale = np.where(norms > threshold, 1.0 - threshold / np.where(norms > 0, norms, 1.0), 0.0)
    return M * scale


def lambda_max(gram: np.ndarray) -> float:
    """Smallest lam for which A = 0 is optimal: 4 * max_i ||G[i, :]||."""
    return 4.0 * float(np.linalg.norm(gram, axis=1).max())


def _power_iteration(gram: np.ndarray, iters: int = 100, tol: float = 1e-10) -> float:
    n = gram.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    est = 0.0
    for _ in range(iters):
        w = gram @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        new = float(v @ gram @ v)
        if abs(new - est) <= tol * max(abs(new), 1e-300):
            est = new
            break
        est = new
    return est


def objective(gram: np.ndarray, A: np.ndarray, lam: float) -> float:
    R = np.eye(gram.shape[0]) - A
    fit = float(np.sum(R * (gram @ R)))
    return max(fit, 0.0) + 0.5 * lam * float(np.linalg.norm(A, axis=1).sum())


def _objective_with_product(R: np.ndarray, GR: np.ndarray, A: np.ndarray, lam: float) -> float:
    return max(float(np.sum(R * GR)), 0.0) + 0.5 * lam * float(np.linalg.norm(A, axis=1).sum())


def solve(X, lam: float | None = None, tol: float = 1e-6, max_iter: int = 500,
          lambda_ratio: float = 0.5) -> LassoSolution:
    """Row-sparse self-representation of the columns of ``X`` (d x n).

    ``lam`` defaults to ``lambda_ratio * lambda_max``.
    """
    data = X.data if hasattr(X, "data") else X
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise InputError(f"need a d x n matrix with n >= 2, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InputError("feature matrix contains non-finite values")

    n = data.shape[1]
    gram = data.T @ data
    lmax = lambda_max(gram)
    if lam is None:
        lam = lambda_ratio * lmax
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam}")

    L = 2.0 * _power_iteration(gram) * (1.0 + 1e-6)
    eye = np.eye(n)
    A = np.zeros((n, n))
    if L == 0.0:
        return LassoSolution(A, [objective(gram, A, lam)], lam, 0, True, lmax)
    thresh = 0.5 * lam / L

    R = eye - A
    GR = gram @ R
    f_cur = _objective_with_product(R, GR, A, lam)
    trace = [f_cur]
    Y = A.copy()
    GRy = GR
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # gradient of the smooth term at Y is -2 G (I - Y)
        Z = _prox_rows(Y + (2.0 / L) * GRy, thresh)
        Rz = eye - Z
        GRz = gram @ Rz
        f_new = _objective_with_product(Rz, GRz, Z, lam)
        if f_new > f_cur and t > 1.0:
            # momentum overshot: restart from the last accepted iterate
            t = 1.0
            Z = _prox_rows(A + (2.0 / L) * GR, thresh)
            Rz = eye - Z
            GRz = gram @ Rz
            f_new = _objective_with_product(Rz, GRz, Z, lam)
        if f_new > f_cur:
            # no descent even from a plain proximal step (round-off level)
            converged = True
            break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Y = Z + ((t - 1.0) / t_next) * (Z - A)
        GRy = gram @ (eye - Y)
        rel = abs(f_cur - f_new) / max(abs(f_cur), 1e-300)
        A, R, GR, f_cur, t = Z, Rz, GRz, f_new, t_next
        trace.append(f_cur)
        if rel < tol:
            converged = True
            break
    return LassoSolution(A, trace, float(lam), it, converged, lmax)


def score_frames(solution: LassoSolution) -> np.ndarray:
    """Row energy of the coefficient matrix: how strongly each column serves as a representative."""
    return np.linalg.norm(solution.coeffs, axis=1)


def boundary_scores(solution: LassoSolution) -> np.ndarray:
    """Per-column change in representation: ``||A[:, i] - A[:, i-1]||`` (0 for column 0).

    Frames of one scene are explained by the same representatives, so their
    coefficient columns agree; the columns jump where the scene changes.
    """
    A = solution.coeffs
    out = np.zeros(A.shape[1])
    if A.shape[1] > 1:
        out[1:] = np.linalg.norm(np.diff(A, axis=1), axis=0)
    return out


def select_splits(scores, k: int, min_gap: int = 1, exclude_first: bool = False) -> SplitSet:
    """Greedy highest-score picks with non-maximum suppression.

    A candidate closer than ``min_gap`` columns to an accepted split is
    skipped.  Ties go to the lower column index.  ``exclude_first`` removes
    column 0, which cannot start a new segment.
    """
    if k < 0 or min_gap < 1:
        raise InputError("need k >= 0 and min_gap >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    chosen: list[int] = []
    for idx in order:
        if len(chosen) >= k:
            break
        idx = int(idx)
        if exclude_first and idx == 0:
            continue
        if any(abs(idx - c) < min_gap for c in chosen):
            continue
        chosen.append(idx)
    return SplitSet(sorted(chosen), scores)


def target_split_count(n_frames_fullrate: int, fps: float, target_segment_seconds: float = 5.0) -> int:
    if n_frames_fullrate <= 0 or fps <= 0 or target_segment_seconds <= 0:
        raise InputError("inputs must be positive")
    duration = n_frames_fullrate / fps
    return max(0, int(round(duration / target_segment_seconds)) - 1)


def write_splits_csv(path, split_set: SplitSet, frame_indices):
    chosen = set(split_set.splits)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column", "fullrate_index", "score", "is_split"])
        for col, (fi, sc) in enumerate(zip(frame_indices, split_set.scores)):
            w.writerow([col, int(fi), repr(float(sc)), int(col in chosen)])
