"""Regression trees grown in-repo: CART, random forest and second-order boosting.

All three learners share one exact greedy split search over (gradient,
hessian) statistics.  CART is the special case g = -y, h = 1, no leaf
regularisation, so its split gain is half the squared-error reduction and
its leaves predict the mean.  Split ties go to the lowest feature index,
then the lowest threshold; rows are put into a canonical order before
fitting, so shuffling the training set never changes a CART model.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

MODEL_FORMAT = "vidsum-tree-v1"
BOOSTED_DEFAULTS = dict(max_depth=3, min_child_weight=5.0, gamma=0.0, subsample=1.0,
                        colsample_bytree=1.0, reg_lambda=1.0)
_GAIN_RTOL = 1e-12


@dataclass
class Tree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"leaf": float(self.value[i])})
            else:
                nodes.append({"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                              "left": int(self.left[i]), "right": int(self.right[i]),
                              "gain": float(self.gain[i])})
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        nodes = d["nodes"]
        n = len(nodes)
        t = cls(np.full(n, -1, dtype=np.int64), np.zeros(n), np.full(n, -1, dtype=np.int64),
                np.full(n, -1, dtype=np.int64), np.zeros(n), np.zeros(n))
        for i, node in enumerate(nodes):
            if "leaf" in node:
                t.value[i] = float(node["leaf"])
            else:
                t.feature[i] = int(node["feature"])
                t.threshold[i] = float(node["threshold"])
                t.left[i], t.right[i] = int(node["left"]), int(node["right"])
                t.gain[i] = float(node.get("gain", 0.0))
                if not (0 < t.left[i] < n and 0 < t.right[i] < n):
                    raise FormatError("tree node points outside the node table")
        return t


@dataclass
class TreeModel:
    kind: str
    trees: list[Tree]
    n_features: int
    base_score: float = 0.0
    shrinkage: float = 1.0
    hyperparams: dict = field(default_factory=dict)
    importance: np.ndarray = field(default=None)
    train_loss: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.importance is None:
            self.importance = gain_importance(self.trees, self.n_features)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise InputError(f"model expects {self.n_features} features, got {X.shape[1]}")
        if self.kind == "forest":
            acc = np.zeros(len(X))
            for t in self.trees:
                acc += t.predict(X)
            return acc / len(self.trees)
        pred = np.full(len(X), self.base_score)
        for t in self.trees:
            pred += self.shrinkage * t.predict(X)
        return pred

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "n_features": self.n_features,
            "base_score": float(self.base_score),
            "shrinkage": float(self.shrinkage),
            "hyperparams": self.hyperparams,
            "trees": [t.to_dict() for t in self.trees],
            "importance": [float(v) for v in self.importance],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        if d.get("format") != MODEL_FORMAT:
            raise FormatError(f"not a {MODEL_FORMAT} model file")
        try:
            return cls(d["kind"], [Tree.from_dict(t) for t in d["trees"]], int(d["n_features"]),
                       float(d["base_score"]), float(d["shrinkage"]), dict(d.get("hyperparams", {})),
                       np.array(d["importance"], dtype=np.float64))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed model file ({exc})") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "TreeModel":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise FormatError(f"{path}: cannot read model ({exc})") from exc
        return cls.from_dict(d)


# -- split search -------------------------------------------------------------

def _check_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) == 0:
        raise InputError("training data must be a non-empty 2-D array")
    if len(y) != len(X):
        raise InputError(f"{len(X)} rows but {len(y)} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data contains non-finite values")
    return X, y


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.column_stack([X, y]).T[::-1]
    return np.lexsort(keys)


def _best_split(X, g, h, rows, features, min_child_weight, reg_lambda, gamma):
    """Return (gain, feature, threshold) of the best admissible split or None."""
    m = len(rows)
    if m < 2 or len(features) == 0:
        return None
    Xn = X[np.ix_(rows, features)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gs = g[rows][order]
    hs = h[rows][order]
    GL = np.cumsum(gs, axis=0)[:-1]
    HL = np.cumsum(hs, axis=0)[:-1]
    G, H = gs.sum(axis=0), hs.sum(axis=0)
    GR, HR = G - GL, H - HL
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda)
                      - G * G / (H + reg_lambda)) - gamma
    ok = (xs[1:] > xs[:-1]) & (HL >= min_child_weight) & (HR >= min_child_weight)
    gain = np.where(ok & np.isfinite(gain), gain, -np.inf)
    flat = gain.T.ravel()  # feature-major: ties resolve to lowest feature, then lowest threshold
    k = int(np.argmax(flat))
    best = float(flat[k])
    scale = 0.5 * float(np.sum(g[rows] ** 2)) / max(float(np.mean(h[rows])), 1e-300)
    if not best > _GAIN_RTOL * scale or not best > 0.0:
        return None
    fi, pos = divmod(k, m - 1)
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return best, int(features[fi]), float(thr)


def _grow(X, g, h, rows, features, max_depth, min_child_weight, reg_lambda, gamma) -> Tree:
    feature, threshold, left, right, value, gains = [], [], [], [], [], []

    def new_node(rws):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        gains.append(0.0)
        gr, hr = g[rws], h[rws]
        if reg_lambda == 0.0 and gr.min() == gr.max() and hr.min() == hr.max():
            # constant leaf: skip the sum so equal targets come back exactly
            value.append(-float(gr[0]) / float(hr[0]))
        else:
            value.append(-float(gr.sum()) / (float(hr.sum()) + reg_lambda))
        return len(feature) - 1

    root = new_node(rows)
    stack = [(root, rows, 0)]
    while stack:
        nid, rws, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        split = _best_split(X, g, h, rws, features, min_child_weight, reg_lambda, gamma)
        if split is None:
            continue
        gain, f, thr = split
        mask = X[rws, f] <= thr
        lrows, rrows = rws[mask], rws[~mask]
        lid, rid = new_node(lrows), new_node(rrows)
        feature[nid], threshold[nid], left[nid], right[nid], gains[nid] = f, thr, lid, rid, gain
        # right pushed first so the left subtree is expanded first (stable node numbering)
        stack.append((rid, rrows, depth + 1))
        stack.append((lid, lrows, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value), np.array(gains))


def gain_importance(trees: list[Tree], n_features: int) -> np.ndarray:
    """Total split gain per feature, divided by the largest total (top feature = 1)."""
    total = np.zeros(n_features)
    for t in trees:
        split = t.feature >= 0
        np.add.at(total, t.feature[split], t.gain[split])
    top = total.max() if n_features else 0.0
    return total / top if top > 0 else total


def feature_importance(model: TreeModel) -> np.ndarray:
    return gain_importance(model.trees, model.n_features)


# -- learners -------------------------------------------------------------------

def fit_cart(X, y, max_depth: int | None = None, min_child_weight: float = 1.0) -> TreeModel:
    X, y = _check_data(X, y)
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    feats = np.arange(X.shape[1])
    tree = _grow(X, -y, np.ones(len(y)), np.arange(len(y)), feats, max_depth, min_child_weight, 0.0, 0.0)
    params = {"max_depth": max_depth, "min_child_weight": min_child_weight}
    return TreeModel("cart", [tree], X.shape[1], 0.0, 1.0, params)


def fit_forest(X, y, n_trees: int = 50, subsample: float = 1.0, colsample: float = 1.0,
               seed: int = 0, max_depth: int | None = None, min_child_weight: float = 1.0,
               bootstrap: bool = True) -> TreeModel:
    X, y = _check_data(X, y)
    if n_trees < 1 or not 0 < subsample <= 1 or not 0 < colsample <= 1:
        raise InputError("need n_trees >= 1 and subsample, colsample in (0, 1]")
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    n, p = X.shape
    rng = np.random.default_rng(seed)
    n_rows = max(1, int(round(subsample * n)))
    n_cols = max(1, int(round(colsample * p)))
    trees = []
    for _ in range(n_trees):
        if bootstrap:
            rows = np.sort(rng.integers(0, n, size=n_rows))
        elif n_rows < n:
            rows = np.sort(rng.choice(n, size=n_rows, replace=False))
        else:
            rows = np.arange(n)
        feats = np.arange(p) if n_cols == p else np.sort(rng.choice(p, size=n_cols, replace=False))
        trees.append(_grow(X, -y, np.ones(n), rows, feats, max_depth, min_child_weight, 0.0, 0.0))
    params = {"n_trees": n_trees, "subsample": subsample, "colsample": colsample, "seed": seed,
              "max_depth": max_depth, "min_child_weight": min_child_weight, "bootstrap": bootstrap}
    return TreeModel("forest", trees, p, 0.0, 1.0, params)


def fit_boosted(X, y, n_rounds: int = 100, shrinkage: float = 0.1, seed: int = 0,
                max_depth: int | None = 3, min_child_weight: float = 5.0, gamma: float = 0.0,
                subsample: float = 1.0, colsample_bytree: float = 1.0,
                reg_lambda: float = 1.0) -> TreeModel:
    """Squared-loss boosting with Newton leaves -G/(H+lambda) and gamma-pruned splits."""
    X, y = _check_data(X, y)
    if n_rounds < 1:
        raise InputError("n_rounds must be >= 1")
    if not 0 < subsample <= 1 or not 0 < colsample_bytree <= 1:
        raise InputError("subsample and colsample_bytree must lie in (0, 1]")
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    n, p = X.shape
    rng = np.random.default_rng(seed)
    base = float(np.mean(y))
    pred = np.full(n, base)
    h = np.ones(n)
    n_rows = max(1, int(round(subsample * n)))
    n_cols = max(1, int(round(colsample_bytree * p)))
    trees, losses = [], [float(np.mean((y - pred) ** 2))]
    for _ in range(n_rounds):
        g = pred - y
        rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, size=n_rows, replace=False))
        feats = np.arange(p) if n_cols == p else np.sort(rng.choice(p, size=n_cols, replace=False))
        tree = _grow(X, g, h, rows, feats, max_depth, min_child_weight, reg_lambda, gamma)
        trees.append(tree)
        pred += shrinkage * tree.predict(X)
        losses.append(float(np.mean((y - pred) ** 2)))
    params = {"n_rounds": n_rounds, "seed": seed, "max_depth": max_depth,
              "min_child_weight": min_child_weight, "gamma": gamma, "subsample": subsample,
              "colsample_bytree": colsample_bytree, "reg_lambda": reg_lambda}
    model = TreeModel("boosted", trees, p, base, shrinkage, params)
    model.train_loss = losses
    return model


LEARNERS = {"cart": fit_cart, "forest": fit_forest, "boosted": fit_boosted}


def fit(kind: str, X, y, **params) -> TreeModel:
    try:
        learner = LEARNERS[kind]
    except KeyError:
        raise InputError(f"unknown learner {kind!r}; choose from {sorted(LEARNERS)}") from None
    return learner(X, y, **params)


def predict(model: TreeModel, features) -> np.ndarray:
    return model.predict(features)


def evaluate_mse(model: TreeModel, X, y) -> float:
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.mean((model.predict(X) - y) ** 2))


@dataclass
class CVSummary:
    fold_mse: list[float]

    @property
    def min(self) -> float:
        return float(np.min(self.fold_mse))

    @property
    def max(self) -> float:
        return float(np.max(self.fold_mse))

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_mse))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_mse))

    def as_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "mean": self.mean, "std": self.std,
                "folds": [float(v) for v in self.fold_mse]}


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    if not 2 <= k <= n:
        raise InputError(f"need 2 <= k <= n rows, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_cv(X, y, k: int = 10, kind: str = "boosted", seed: int = 0, **params) -> CVSummary:
    """Seeded shuffle, k contiguous folds; train on k-1 folds, score MSE on the held-out one.

    ``seed`` also seeds randomised learners unless ``params`` sets their seed.
    """
    X, y = _check_data(X, y)
    folds = kfold_indices(len(y), k, seed)
    if kind != "cart":
        params.setdefault("seed", seed)
    scores = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = fit(kind, X[train], y[train], **params)
        scores.append(evaluate_mse(model, X[test], y[test]))
    return CVSummary(scores)


# -- aesthetic bit ------------------------------------------------------------------

def train_aesthetic_bit(X, scores, threshold: float = 0.5, **params) -> TreeModel:
    """Boosted regression on {0,1} targets (score >= threshold -> 1)."""
    y = (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.float64)
    opts = dict(BOOSTED_DEFAULTS)
    opts.update(params)
    return fit_boosted(X, y, **opts)


def predict_bit(model: TreeModel, X, threshold: float = 0.5) -> np.ndarray:
    return (model.predict(X) >= threshold).astype(np.int64)


# -- training CSV ------------------------------------------------------------------------

def read_training_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "target":
            raise FormatError(f"{path}: last column must be 'target'")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise FormatError(f"{path}: no training rows")
    data = np.array(rows, dtype=np.float64)
    return data[:, :-1], data[:, -1], header[:-1]


def write_training_csv(path, X, y, names: list[str] | None = None):
    X = np.asarray(X, dtype=np.float64)
    if names is None:
        names = [f"f{i}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["target"])
        for row, t in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])
