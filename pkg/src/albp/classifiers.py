"""From-scratch classifiers sharing a fit / predict-probability contract.

Five base learners (k-NN, Gaussian naive Bayes, CART decision tree, random
forest, one-vs-rest linear SVM) plus an unweighted soft-voting ensemble.
Everything is seed-deterministic; trained models are immutable.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelIOError

KINDS = ("knn", "naive_bayes", "decision_tree", "random_forest", "svm")

_MODEL_FORMAT = "albp-model"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    knn_k: int = 5
    nb_variance_floor: float = 1e-9
    tree_max_depth: int = 20
    tree_min_leaf: int = 2
    forest_trees: int = 100
    forest_feature_fraction: float | None = None  # None -> sqrt(d)/d
    svm_epochs: int = 200
    svm_learning_rate: float = 0.01
    svm_regularization: float = 1e-4
    seed: int = 42

    def __post_init__(self):
        if min(self.knn_k, self.tree_max_depth, self.tree_min_leaf,
               self.forest_trees, self.svm_epochs) < 1:
            raise ValueError("counts must be >= 1")
        if self.svm_learning_rate <= 0 or self.nb_variance_floor <= 0:
            raise ValueError("rates must be > 0")


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.labels) != len(self.features):
            raise ValueError("features and labels disagree in length")
        if len(self.class_names) < 1:
            raise ValueError("need at least one class name")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label index out of range")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def _as_batch(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected feature dimension {dim}, got shape {x.shape}")
    return x, single


class Model:
    """Common surface: predict_proba accepts a (d,) vector or an (n, d) batch."""

    kind: str
    n_features: int
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x, single = _as_batch(x, self.n_features)
        probs = self._proba(x)
        return probs[0] if single else probs

    def predict(self, x: np.ndarray) -> np.ndarray | int:
        probs = self.predict_proba(x)
        # np.argmax resolves ties toward the lowest class index
        return np.argmax(probs, axis=-1) if probs.ndim == 2 else int(np.argmax(probs))

    def _proba(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class KnnModel(Model):
    kind = "knn"

    def __init__(self, train_x, train_y, k, class_names):
        self.train_x = train_x
        self.train_y = train_y
        self.k = min(k, len(train_x))
        self.class_names = tuple(class_names)
        self.n_features = train_x.shape[1]

    def _proba(self, x):
        out = np.empty((len(x), self.n_classes))
        for start in range(0, len(x), 64):  # chunk to bound the distance matrix
            chunk = x[start : start + 64]
            d2 = ((chunk[:, None, :] - self.train_x[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances resolve to the lower training index
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            for i, idx in enumerate(nearest):
                votes = np.bincount(self.train_y[idx], minlength=self.n_classes)
                out[start + i] = votes / self.k
        return out


class GaussianNBModel(Model):
    kind = "naive_bayes"

    def __init__(self, means, variances, log_priors, class_names):
        self.means = means            # (C, d)
        self.variances = variances    # (C, d), floored
        self.log_priors = log_priors  # (C,)
        self.class_names = tuple(class_names)
        self.n_features = means.shape[1]

    def _proba(self, x):
        # log joint per class, normalized with log-sum-exp
        diff = x[:, None, :] - self.means[None, :, :]
        log_lik = -0.5 * (np.log(2.0 * np.pi * self.variances)[None] + diff**2 / self.variances[None]).sum(axis=2)
        log_post = log_lik + self.log_priors[None, :]
        log_post -= log_post.max(axis=1, keepdims=True)
        p = np.exp(log_post)
        return p / p.sum(axis=1, keepdims=True)


class DecisionTreeModel(Model):
    kind = "decision_tree"

    def __init__(self, root, n_features, class_names):
        self.root = root  # nested dicts: leaf {"probs"} / split {"feature","threshold","left","right"}
        self.n_features = n_features
        self.class_names = tuple(class_names)

    def _proba(self, x):
        out = np.empty((len(x), self.n_classes))
        _tree_apply(self.root, x, np.arange(len(x)), out)
        return out


class RandomForestModel(Model):
    kind = "random_forest"

    def __init__(self, trees, n_features, class_names, seed):
        self.trees = trees
        self.n_features = n_features
        self.class_names = tuple(class_names)
        self.seed = seed

    def _proba(self, x):
        acc = np.zeros((len(x), self.n_classes))
        for root in self.trees:
            part = np.empty((len(x), self.n_classes))
            _tree_apply(root, x, np.arange(len(x)), part)
            acc += part
        return acc / len(self.trees)


class LinearSvmModel(Model):
    kind = "svm"

    def __init__(self, weights, biases, class_names):
        self.weights = weights  # (C, d) one-vs-rest
        self.biases = biases    # (C,)
        self.class_names = tuple(class_names)
        self.n_features = weights.shape[1]

    def margins(self, x):
        x, single = _as_batch(x, self.n_features)
        m = x @ self.weights.T + self.biases[None, :]
        return m[0] if single else m

    def _proba(self, x):
        m = x @ self.weights.T + self.biases[None, :]
        m -= m.max(axis=1, keepdims=True)
        e = np.exp(m)
        return e / e.sum(axis=1, keepdims=True)


class SoftVoteModel(Model):
    kind = "soft_vote"

    def __init__(self, members):
        if not members:
            raise ValueError("soft vote needs at least one member")
        names = members[0].class_names
        if any(m.class_names != names for m in members[1:]):
            raise ValueError("soft-vote members disagree on the class set")
        self.members = list(members)
        self.class_names = names
        self.n_features = members[0].n_features

    def _proba(self, x):
        return np.mean([m._proba(x) for m in self.members], axis=0)


def soft_vote(members, x) -> np.ndarray:
    """Unweighted mean of member class probabilities."""
    return SoftVoteModel(members).predict_proba(x)


# ---------------------------------------------------------------------------
# tree growth


def _gini_candidates(xf, y, n_classes, min_leaf):
    """Best (weighted gini, threshold) split of one feature, or None."""
    order = np.argsort(xf, kind="stable")
    xs = xf[order]
    ys = y[order]
    n = len(xs)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    # split after position i (left gets i+1 samples); both sides >= min_leaf,
    # and only between strictly different feature values
    pos = np.arange(min_leaf - 1, n - min_leaf)
    if len(pos) == 0:
        return None
    valid = xs[pos] < xs[pos + 1]
    pos = pos[valid]
    if len(pos) == 0:
        return None
    nl = (pos + 1).astype(np.float64)
    nr = n - nl
    left = cum[pos]
    right = total[None, :] - left
    gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n
    best = int(np.argmin(weighted))
    i = pos[best]
    return weighted[best], (xs[i] + xs[i + 1]) / 2.0


def _grow_tree(X, y, n_classes, depth, max_depth, min_leaf, feature_pool=None, rng=None, n_sub=None):
    counts = np.bincount(y, minlength=n_classes)
    probs = counts / counts.sum()

    def leaf():
        return {"probs": probs}

    if depth >= max_depth or counts.max() == counts.sum() or len(y) < 2 * min_leaf:
        return leaf()
    if rng is not None:
        feats = np.sort(rng.choice(X.shape[1], size=n_sub, replace=False))
    else:
        feats = range(X.shape[1])
    best = None
    for f in feats:
        cand = _gini_candidates(X[:, f], y, n_classes, min_leaf)
        if cand is not None and (best is None or cand[0] < best[0]):
            best = (cand[0], f, cand[1])
    if best is None:
        return leaf()  # all candidate features constant
    _, f, thr = best
    mask = X[:, f] <= thr
    return {
        "feature": int(f),
        "threshold": float(thr),
        "left": _grow_tree(X[mask], y[mask], n_classes, depth + 1, max_depth, min_leaf, None, rng, n_sub),
        "right": _grow_tree(X[~mask], y[~mask], n_classes, depth + 1, max_depth, min_leaf, None, rng, n_sub),
    }


def _tree_apply(node, x, idx, out):
    if "probs" in node:
        out[idx] = node["probs"]
        return
    go_left = x[idx, node["feature"]] <= node["threshold"]
    _tree_apply(node["left"], x, idx[go_left], out)
    _tree_apply(node["right"], x, idx[~go_left], out)


# ---------------------------------------------------------------------------
# fitting


def fit(kind: str, dataset: LabeledDataset, cfg: TrainConfig = TrainConfig()) -> Model:
    counts = dataset.class_counts()
    if counts.min() == 0:
        empty = dataset.class_names[int(np.argmin(counts))]
        raise ValueError(f"class {empty!r} has no training samples")
    X, y, names = dataset.features, dataset.labels, dataset.class_names

    if kind == "knn":
        return KnnModel(X.copy(), y.copy(), cfg.knn_k, names)

    if kind == "naive_bayes":
        C, d = dataset.n_classes, X.shape[1]
        means = np.empty((C, d))
        variances = np.empty((C, d))
        for c in range(C):
            xc = X[y == c]
            means[c] = xc.mean(axis=0)
            variances[c] = np.maximum(xc.var(axis=0), cfg.nb_variance_floor)
        log_priors = np.log(counts / counts.sum())
        return GaussianNBModel(means, variances, log_priors, names)

    if kind == "decision_tree":
        root = _grow_tree(X, y, dataset.n_classes, 0, cfg.tree_max_depth, cfg.tree_min_leaf)
        return DecisionTreeModel(root, X.shape[1], names)

    if kind == "random_forest":
        d = X.shape[1]
        frac = cfg.forest_feature_fraction
        n_sub = max(1, int(round((frac if frac is not None else np.sqrt(d) / d) * d)))
        trees = []
        for t in range(cfg.forest_trees):
            rng = np.random.default_rng(cfg.seed + t)
            boot = rng.integers(0, len(X), size=len(X))
            trees.append(_grow_tree(X[boot], y[boot], dataset.n_classes, 0,
                                    cfg.tree_max_depth, cfg.tree_min_leaf,
                                    rng=rng, n_sub=n_sub))
        return RandomForestModel(trees, d, names, cfg.seed)

    if kind == "svm":
        C, d = dataset.n_classes, X.shape[1]
        n = len(X)
        W = np.zeros((C, d))
        b = np.zeros(C)
        targets = np.where(y[None, :] == np.arange(C)[:, None], 1.0, -1.0)  # (C, n)
        for _ in range(cfg.svm_epochs):
            margins = targets * (X @ W.T + b[None, :]).T  # (C, n)
            viol = margins < 1.0
            grad_w = cfg.svm_regularization * W - (np.where(viol, targets, 0.0) @ X) / n
            grad_b = -np.where(viol, targets, 0.0).sum(axis=1) / n
            W -= cfg.svm_learning_rate * grad_w
            b -= cfg.svm_learning_rate * grad_b
        return LinearSvmModel(W, b, names)

    raise ValueError(f"unknown classifier kind {kind!r} (expected one of {KINDS})")


def fit_ensemble(dataset: LabeledDataset, cfg: TrainConfig = TrainConfig(), kinds=KINDS) -> SoftVoteModel:
    return SoftVoteModel([fit(k, dataset, cfg) for k in kinds])


# ---------------------------------------------------------------------------
# serialization


def save_model(model: Model, path) -> None:
    payload = {"format": _MODEL_FORMAT, "version": _MODEL_VERSION, "kind": model.kind, "model": model}
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_model(path) -> Model:
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
    except (pickle.UnpicklingError, EOFError, AttributeError, IndexError) as exc:
        raise ModelIOError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != _MODEL_FORMAT:
        raise ModelIOError(f"{path}: not a model file")
    if payload.get("version", 0) > _MODEL_VERSION:
        raise ModelIOError(f"{path}: model version {payload['version']} is newer than supported {_MODEL_VERSION}")
    return payload["model"]
