"""Supervised cluster-label prediction: KNN, one-vs-rest SVM (primal
subgradient, optional random-Fourier RBF map), and a single-hidden-layer MLP,
plus split / accuracy / k-fold grid-search utilities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .serialize import read_f64le, read_json, write_f64le, write_json


class ClassifyError(Exception):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    vectors: np.ndarray   # N x d
    labels: np.ndarray    # length N, values 0..C-1
    class_count: int

    def __post_init__(self):
        X = np.asarray(self.vectors, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "vectors", X)
        object.__setattr__(self, "labels", y)
        if X.ndim != 2 or len(X) != len(y):
            raise ClassifyError(f"vectors {X.shape} and labels {y.shape} are inconsistent")
        present = np.unique(y)
        if len(present) != self.class_count or present[0] != 0 or present[-1] != self.class_count - 1:
            raise ClassifyError(
                f"labels must cover 0..{self.class_count - 1}; saw classes {present.tolist()}")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.67
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ClassifyError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def split(dataset: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive train/test split; stratified keeps class proportions."""
    rng = np.random.default_rng(spec.seed)
    n = len(dataset)
    if spec.stratified:
        members_by_class = []
        for c in range(dataset.class_count):
            members = np.flatnonzero(dataset.labels == c)
            if len(members) < 2:
                raise ClassifyError(f"class {c} has {len(members)} members; stratified split needs >= 2")
            members_by_class.append(rng.permutation(members))
        # largest-remainder allocation so the overall train count equals round(n * fraction)
        target = int(round(n * spec.train_fraction))
        quotas = [len(m) * spec.train_fraction for m in members_by_class]
        counts = [max(1, min(len(m) - 1, int(q))) for m, q in zip(members_by_class, quotas)]
        order = sorted(range(len(quotas)), key=lambda c: quotas[c] - int(quotas[c]), reverse=True)
        for c in order:
            if sum(counts) >= target:
                break
            if counts[c] < len(members_by_class[c]) - 1:
                counts[c] += 1
        train_idx = []
        test_idx = []
        for members, n_train in zip(members_by_class, counts):
            train_idx.extend(members[:n_train])
            test_idx.extend(members[n_train:])
        train_idx = np.sort(np.array(train_idx))
        test_idx = np.sort(np.array(test_idx))
    else:
        perm = rng.permutation(n)
        n_train = round(n * spec.train_fraction)
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
    C = dataset.class_count
    return (
        LabeledDataset(dataset.vectors[train_idx], dataset.labels[train_idx], C),
        LabeledDataset(dataset.vectors[test_idx], dataset.labels[test_idx], C),
    )


def accuracy(predictions, truth) -> float:
    p = np.asarray(predictions)
    t = np.asarray(truth)
    if len(p) != len(t):
        raise ClassifyError(f"length mismatch: {len(p)} predictions vs {len(t)} labels")
    if len(p) == 0:
        raise ClassifyError("empty prediction list")
    return float(np.mean(p == t))


# ---------------------------------------------------------------------------
# KNN

@dataclass(frozen=True)
class KnnModel:
    vectors: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ClassifyError(f"k must be >= 1, got {self.k}")


def knn_fit(train: LabeledDataset, k: int) -> KnnModel:
    return KnnModel(vectors=train.vectors, labels=train.labels, k=k)


def knn_predict(model: KnnModel, x: np.ndarray) -> int:
    """Majority label of the k nearest; ties -> smallest mean distance, then smallest label."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.vectors.shape[1],):
        raise ClassifyError(
            f"dimension mismatch: point {x.shape} vs stored {model.vectors.shape[1]}")
    d = np.linalg.norm(model.vectors - x, axis=1)
    order = np.argsort(d, kind="stable")[: model.k]
    near_labels = model.labels[order]
    near_d = d[order]
    best = None
    for lab in np.unique(near_labels):
        sel = near_labels == lab
        key = (-int(sel.sum()), float(near_d[sel].mean()), int(lab))
        if best is None or key < best:
            best = key
    return best[2]


def knn_predict_batch(model: KnnModel, X: np.ndarray) -> np.ndarray:
    return np.array([knn_predict(model, x) for x in np.asarray(X, dtype=np.float64)])


# ---------------------------------------------------------------------------
# MLP: ReLU hidden layer, softmax cross-entropy output

@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    loss_trace: list[float] = field(default_factory=list)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mlp_init(d: int, hidden: int, classes: int, seed: int) -> MlpModel:
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / np.sqrt(d)
    lim2 = 1.0 / np.sqrt(hidden)
    return MlpModel(
        W1=rng.uniform(-lim1, lim1, (d, hidden)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-lim2, lim2, (hidden, classes)),
        b2=np.zeros(classes),
    )


def mlp_forward(model: MlpModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.maximum(X @ model.W1 + model.b1, 0.0)
    return softmax(h @ model.W2 + model.b2), h


def mlp_loss_and_grads(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and analytic gradients for all parameters."""
    n = len(X)
    probs, h = mlp_forward(model, X)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))
    dz2 = probs.copy()
    dz2[np.arange(n), y] -= 1.0
    dz2 /= n
    gW2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh = dz2 @ model.W2.T
    dh[h <= 0.0] = 0.0
    gW1 = X.T @ dh
    gb1 = dh.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def mlp_fit(train: LabeledDataset, hidden: int = 128, epochs: int = 300, lr: float = 0.05,
            batch: int = 32, seed: int = 0) -> MlpModel:
    """Mini-batch gradient descent on softmax cross-entropy."""
    X, y = train.vectors, train.labels
    model = mlp_init(X.shape[1], hidden, train.class_count, seed)
    rng = np.random.default_rng((seed, 1))
    n = len(X)
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            sel = order[start:start + batch]
            loss, g = mlp_loss_and_grads(model, X[sel], y[sel])
            if not np.isfinite(loss):
                raise ClassifyError(
                    f"non-finite loss at epoch {epoch}; lower the learning rate (lr={lr})")
            epoch_loss += loss * len(sel)
            model.W1 -= lr * g["W1"]
            model.b1 -= lr * g["b1"]
            model.W2 -= lr * g["W2"]
            model.b2 -= lr * g["b2"]
        model.loss_trace.append(epoch_loss / n)
        if not all(np.all(np.isfinite(p)) for p in (model.W1, model.b1, model.W2, model.b2)):
            raise ClassifyError(
                f"non-finite weights after epoch {epoch}; lower the learning rate (lr={lr})")
    return model


def mlp_predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    probs, _ = mlp_forward(model, np.atleast_2d(np.asarray(X, dtype=np.float64)))
    return np.argmax(probs, axis=1)


# ---------------------------------------------------------------------------
# SVM: one-vs-rest, primal subgradient on L2-regularized hinge loss

@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray      # C x d_feat
    biases: np.ndarray       # C
    C: float
    kernel: str              # "linear" | "rbf"
    gamma: float
    rff_weights: Optional[np.ndarray] = None   # d x n_features, rbf only
    rff_offsets: Optional[np.ndarray] = None   # n_features, rbf only

    def features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.kernel == "rbf":
            z = X @ self.rff_weights + self.rff_offsets
            return np.sqrt(2.0 / self.rff_weights.shape[1]) * np.cos(z)
        return X

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.features(X) @ self.weights.T + self.biases


def _pegasos_binary(F: np.ndarray, y: np.ndarray, lam: float, epochs: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, float]:
    # y in {-1, +1}; subgradient descent with the 1/(lam*t) step schedule.
    # Bias handled as an appended constant feature; averaged iterates returned.
    n, d = F.shape
    Fb = np.hstack([F, np.ones((n, 1))])
    w = np.zeros(d + 1)
    w_sum = np.zeros(d + 1)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (Fb[i] @ w)
            w *= (1.0 - eta * lam)
            if margin < 1.0:
                w += eta * y[i] * Fb[i]
            w_sum += w
    w_avg = w_sum / t
    return w_avg[:d], float(w_avg[d])


def svm_fit(train: LabeledDataset, C: float = 1.0, kernel: str = "linear",
            gamma: float = 1.0, epochs: int = 50, seed: int = 0,
            rff_features: int = 512) -> SvmModel:
    """One binary hinge-loss scorer per class; RBF realized by random Fourier features."""
    if C <= 0:
        raise ClassifyError(f"C must be positive, got {C}")
    if kernel not in ("linear", "rbf"):
        raise ClassifyError(f"unknown kernel {kernel!r}")
    if kernel == "rbf" and gamma <= 0:
        raise ClassifyError(f"gamma must be positive for rbf, got {gamma}")
    if train.class_count < 2:
        raise ClassifyError("SVM needs at least 2 classes")
    X, y = train.vectors, train.labels
    d = X.shape[1]
    rff_w = rff_b = None
    if kernel == "rbf":
        rng = np.random.default_rng((seed, 7))
        rff_w = rng.normal(0.0, np.sqrt(2.0 * gamma), (d, rff_features))
        rff_b = rng.uniform(0.0, 2.0 * np.pi, rff_features)
    model = SvmModel(weights=np.zeros((train.class_count, 1)), biases=np.zeros(train.class_count),
                     C=C, kernel=kernel, gamma=gamma, rff_weights=rff_w, rff_offsets=rff_b)
    F = model.features(X)
    lam = 1.0 / (C * len(X))
    weights = np.zeros((train.class_count, F.shape[1]))
    biases = np.zeros(train.class_count)
    for c in range(train.class_count):
        rng = np.random.default_rng((seed, c))
        yc = np.where(y == c, 1.0, -1.0)
        weights[c], biases[c] = _pegasos_binary(F, yc, lam, epochs, rng)
    return SvmModel(weights=weights, biases=biases, C=C, kernel=kernel, gamma=gamma,
                    rff_weights=rff_w, rff_offsets=rff_b)


def svm_predict(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.scores(X), axis=1)


# ---------------------------------------------------------------------------
# grid search

def grid_search(train: LabeledDataset, fit_fn, param_grid: Sequence[dict],
                predict_fn, folds: int = 3, seed: int = 0):
    """Seeded k-fold CV accuracy per grid point; argmax with first-in-grid tie-break.

    fit_fn(dataset, **params) -> model; predict_fn(model, X) -> labels.
    Returns (best_params, table) where table rows are
    {"params", "mean_accuracy", "fold_accuracies", "error"}.
    """
    if folds < 2:
        raise ClassifyError(f"folds must be >= 2, got {folds}")
    if not param_grid:
        raise ClassifyError("empty parameter grid")
    rng = np.random.default_rng(seed)
    n = len(train)
    perm = rng.permutation(n)
    fold_ids = np.array_split(perm, folds)
    table = []
    best = None
    for gi, params in enumerate(param_grid):
        fold_accs = []
        error = None
        for f in range(folds):
            test_idx = fold_ids[f]
            train_idx = np.concatenate([fold_ids[g] for g in range(folds) if g != f])
            try:
                sub = LabeledDataset(train.vectors[train_idx], train.labels[train_idx],
                                     train.class_count)
                model = fit_fn(sub, **params)
                preds = predict_fn(model, train.vectors[test_idx])
                fold_accs.append(accuracy(preds, train.labels[test_idx]))
            except Exception as e:  # recorded per cell, not fatal
                error = f"{type(e).__name__}: {e}"
                break
        mean_acc = float(np.mean(fold_accs)) if fold_accs and error is None else float("nan")
        table.append({"params": params, "mean_accuracy": mean_acc,
                      "fold_accuracies": fold_accs, "error": error})
        if error is None and (best is None or mean_acc > best[0]):
            best = (mean_acc, gi)
    if best is None:
        raise ClassifyError("every grid point failed; see table for per-cell errors")
    return param_grid[best[1]], table


# ---------------------------------------------------------------------------
# artifact persistence

def save_classifier(model, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if isinstance(model, KnnModel):
        meta = {"family": "knn", "k": model.k,
                "shape": list(model.vectors.shape)}
        write_f64le(d / "weights.f64le", model.vectors)
        write_f64le(d / "labels.f64le", model.labels.astype(np.float64))
    elif isinstance(model, MlpModel):
        meta = {"family": "mlp",
                "shapes": {k: list(getattr(model, k).shape) for k in ("W1", "b1", "W2", "b2")}}
        write_f64le(d / "weights.f64le",
                    np.concatenate([getattr(model, k).ravel() for k in ("W1", "b1", "W2", "b2")]))
    elif isinstance(model, SvmModel):
        meta = {"family": "svm", "C": model.C, "kernel": model.kernel, "gamma": model.gamma,
                "shape": list(model.weights.shape),
                "rff_shape": list(model.rff_weights.shape) if model.rff_weights is not None else None}
        parts = [model.weights.ravel(), model.biases]
        if model.rff_weights is not None:
            parts += [model.rff_weights.ravel(), model.rff_offsets]
        write_f64le(d / "weights.f64le", np.concatenate(parts))
    else:
        raise ClassifyError(f"cannot serialize model of type {type(model).__name__}")
    write_json(d / "classifier.json", meta)


def load_classifier(directory: str | Path):
    d = Path(directory)
    meta = read_json(d / "classifier.json")
    blob = read_f64le(d / "weights.f64le")
    family = meta["family"]
    if family == "knn":
        shape = meta["shape"]
        return KnnModel(vectors=blob.reshape(shape),
                        labels=read_f64le(d / "labels.f64le").astype(np.int64),
                        k=meta["k"])
    if family == "mlp":
        shapes = meta["shapes"]
        arrays = {}
        pos = 0
        for key in ("W1", "b1", "W2", "b2"):
            size = int(np.prod(shapes[key]))
            arrays[key] = blob[pos:pos + size].reshape(shapes[key])
            pos += size
        return MlpModel(**arrays)
    if family == "svm":
        shape = meta["shape"]
        pos = int(np.prod(shape))
        weights = blob[:pos].reshape(shape)
        biases = blob[pos:pos + shape[0]]
        pos += shape[0]
        rff_w = rff_b = None
        if meta["rff_shape"]:
            size = int(np.prod(meta["rff_shape"]))
            rff_w = blob[pos:pos + size].reshape(meta["rff_shape"])
            pos += size
            rff_b = blob[pos:pos + meta["rff_shape"][1]]
        return SvmModel(weights=weights, biases=biases, C=meta["C"], kernel=meta["kernel"],
                        gamma=meta["gamma"], rff_weights=rff_w, rff_offsets=rff_b)
    raise ClassifyError(f"unknown classifier family {family!r}")


def predict_any(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, KnnModel):
        return knn_predict_batch(model, X)
    if isinstance(model, MlpModel):
        return mlp_predict(model, X)
    if isinstance(model, SvmModel):
        return svm_predict(model, X)
    raise ClassifyError(f"unknown model type {type(model).__name__}")


def class_count_of(model) -> int:
    if isinstance(model, KnnModel):
        return int(model.labels.max()) + 1
    if isinstance(model, MlpModel):
        return model.b2.shape[0]
    if isinstance(model, SvmModel):
        return model.weights.shape[0]
    raise ClassifyError(f"unknown model type {type(model).__name__}")
