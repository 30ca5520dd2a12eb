"""Unsupervised labeling: k-means (k-means++ seeding, restarts, empty-cluster
repair) and DBSCAN, plus the WCSS/elbow and silhouette diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

NOISE = -1


class ClusterError(Exception):
    pass


@dataclass(frozen=True)
class ClusterModel:
    algorithm: str                  # "kmeans" | "dbscan"
    k: int
    labels: np.ndarray              # per-document int labels, DBSCAN noise = -1
    centroids: Optional[np.ndarray] # k x d, k-means only
    wcss: float
    iterations_run: int
    seed: int


@dataclass(frozen=True)
class ScanCurve:
    metric: str                     # "wcss" | "silhouette"
    points: tuple[tuple[int, float], ...]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "score"])
            for k, score in self.points:
                w.writerow([k, f"{score:.12g}"])


def _as_matrix(X) -> np.ndarray:
    M = np.asarray(X, dtype=np.float64)
    if M.ndim != 2:
        raise ClusterError(f"expected a 2-d point array, got shape {M.shape}")
    return M


def wcss(X, labels, centroids) -> float:
    """Sum of squared Euclidean distances to assigned centroids; noise excluded."""
    M = _as_matrix(X)
    labels = np.asarray(labels)
    mask = labels != NOISE
    diffs = M[mask] - np.asarray(centroids)[labels[mask]]
    return float(np.sum(diffs * diffs))


def _kmeans_pp_init(M: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(M)
    centroids = np.empty((k, M.shape[1]))
    first = rng.integers(n)
    centroids[0] = M[first]
    d2 = np.sum((M - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[j] = M[idx]
        d2 = np.minimum(d2, np.sum((M - centroids[j]) ** 2, axis=1))
    return centroids


def _hartigan_refine(M: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
                     max_passes: int = 100) -> bool:
    """Single-point moves that strictly lower WCSS, applied until none is left.

    Escapes Lloyd fixed points that are not single-swap optimal. Centroids are
    kept as exact member means throughout. Returns True if anything moved.
    """
    k = len(centroids)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    moved_any = False
    for _ in range(max_passes):
        moved = False
        for i in range(len(M)):
            src = labels[i]
            if counts[src] <= 1:
                continue
            d2 = np.sum((centroids - M[i]) ** 2, axis=1)
            # exact WCSS deltas for removing from src / inserting into dst
            removal = counts[src] / (counts[src] - 1.0) * d2[src]
            gains = counts / (counts + 1.0) * d2 - removal
            gains[src] = 0.0
            dst = int(np.argmin(gains))
            if gains[dst] < -1e-12:
                centroids[src] = (centroids[src] * counts[src] - M[i]) / (counts[src] - 1.0)
                centroids[dst] = (centroids[dst] * counts[dst] + M[i]) / (counts[dst] + 1.0)
                counts[src] -= 1.0
                counts[dst] += 1.0
                labels[i] = dst
                moved = moved_any = True
        if not moved:
            break
    return moved_any


def _assign(M: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # squared distances via the expansion trick; exact enough at these scales
    d2 = (np.sum(M * M, axis=1)[:, None]
          - 2.0 * (M @ centroids.T)
          + np.sum(centroids * centroids, axis=1)[None, :])
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2


def _lloyd(M: np.ndarray, centroids: np.ndarray, max_iters: int, tol: float):
    k = len(centroids)
    labels, _ = _assign(M, centroids)
    wcss_trace = []
    iters = 0
    for iters in range(1, max_iters + 1):
        new_centroids = centroids.copy()
        for j in range(k):
            members = M[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
        # repair empty clusters from the point farthest from its centroid
        empty = [j for j in range(k) if not np.any(labels == j)]
        if empty:
            _, d2 = _assign(M, new_centroids)
            cur = d2[np.arange(len(M)), labels]
            for j in empty:
                far = int(np.argmax(cur))
                new_centroids[j] = M[far]
                cur[far] = 0.0
        new_labels, _ = _assign(M, new_centroids)
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids, labels = new_centroids, new_labels
        wcss_trace.append(wcss(M, labels, centroids))
        if shift < tol:
            break
    # tighten until stable (centroid == member mean, Voronoi labels), then
    # escape single-swap local optima and re-tighten
    for _ in range(100):
        for _ in range(100):
            for j in range(k):
                members = M[labels == j]
                if len(members):
                    centroids[j] = members.mean(axis=0)
            new_labels, _ = _assign(M, centroids)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        if not _hartigan_refine(M, labels, centroids):
            break
    wcss_trace.append(wcss(M, labels, centroids))
    return centroids, labels, iters, wcss_trace


def kmeans_fit(X, k: int, seed: int = 0, max_iters: int = 300, tol: float = 1e-9,
               n_restarts: int = 10) -> ClusterModel:
    """k-means++ with restarts; best WCSS wins; deterministic per seed."""
    M = _as_matrix(X)
    if not 1 <= k <= len(M):
        raise ClusterError(f"k={k} out of range 1..{len(M)}")
    best = None
    for restart in range(max(1, n_restarts)):
        rng = np.random.default_rng((seed, restart))
        centroids = _kmeans_pp_init(M, k, rng)
        centroids, labels, iters, trace = _lloyd(M, centroids, max_iters, tol)
        score = wcss(M, labels, centroids)
        for a, b in zip(trace, trace[1:]):
            if b > a + 1e-7 * max(1.0, a):
                raise ClusterError(f"WCSS increased during Lloyd iteration: {a} -> {b}")
        if best is None or score < best[0]:
            best = (score, centroids, labels, iters)
    score, centroids, labels, iters = best
    return ClusterModel(algorithm="kmeans", k=k, labels=labels, centroids=centroids,
                        wcss=score, iterations_run=iters, seed=seed)


def kmeans_predict(model: ClusterModel, x: np.ndarray) -> int:
    if model.centroids is None:
        raise ClusterError("model has no centroids")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.centroids.shape[1]:
        raise ClusterError(f"dimension mismatch: point has {x.shape[-1]}, centroids have {model.centroids.shape[1]}")
    return int(np.argmin(np.sum((model.centroids - x) ** 2, axis=1)))


def dbscan_fit(X, eps: float, min_pts: int) -> ClusterModel:
    """Core/border/noise labeling under Euclidean distance; noise = -1."""
    if eps <= 0:
        raise ClusterError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ClusterError(f"min_pts must be >= 1, got {min_pts}")
    M = _as_matrix(X)
    n = len(M)
    d2 = (np.sum(M * M, axis=1)[:, None] - 2.0 * (M @ M.T) + np.sum(M * M, axis=1)[None, :])
    np.maximum(d2, 0.0, out=d2)
    neighbors = [np.flatnonzero(d2[i] <= eps * eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop()
            if labels[j] == NOISE:
                labels[j] = cluster
                if core[j]:
                    frontier.extend(neighbors[j])
        cluster += 1
    return ClusterModel(algorithm="dbscan", k=cluster, labels=labels, centroids=None,
                        wcss=0.0, iterations_run=1, seed=0)


def silhouette(X, labels, sample_cap: int = 2000, seed: int = 0) -> float:
    """Mean of (b - a) / max(a, b); noise excluded, singleton clusters score 0."""
    M = _as_matrix(X)
    labels = np.asarray(labels)
    mask = labels != NOISE
    M, labels = M[mask], labels[mask]
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ClusterError(f"silhouette needs >= 2 clusters, got {len(uniq)}")
    if len(M) > sample_cap:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(M), size=sample_cap, replace=False)
        idx.sort()
        M, labels = M[idx], labels[idx]
        uniq = np.unique(labels)
        if len(uniq) < 2:
            raise ClusterError("subsample collapsed to a single cluster; raise sample_cap")
    d = np.sqrt(np.maximum(
        np.sum(M * M, axis=1)[:, None] - 2.0 * (M @ M.T) + np.sum(M * M, axis=1)[None, :], 0.0))
    scores = np.zeros(len(M))
    sizes = {c: int(np.sum(labels == c)) for c in uniq}
    for i in range(len(M)):
        c = labels[i]
        if sizes[c] == 1:
            scores[i] = 0.0
            continue
        a = d[i][labels == c].sum() / (sizes[c] - 1)
        b = min(d[i][labels == o].mean() for o in uniq if o != c)
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def scan_k(X, k_min: int, k_max: int, metric: str = "wcss", seed: int = 0,
           n_restarts: int = 10) -> ScanCurve:
    """Fit k-means for each k in [k_min, k_max] and report the chosen metric."""
    M = _as_matrix(X)
    if not 2 <= k_min <= k_max <= len(M):
        raise ClusterError(f"invalid scan range [{k_min}, {k_max}] for {len(M)} points")
    if metric not in ("wcss", "silhouette"):
        raise ClusterError(f"unknown scan metric {metric!r}")
    points = []
    for k in range(k_min, k_max + 1):
        model = kmeans_fit(M, k, seed=seed + k, n_restarts=n_restarts)
        if metric == "wcss":
            score = model.wcss
        else:
            score = silhouette(M, model.labels, seed=seed)
        points.append((k, score))
    return ScanCurve(metric=metric, points=tuple(points))


def kdistance_curve(X, k: int) -> np.ndarray:
    """Sorted distance to each point's k-th nearest neighbor; eps-selection aid."""
    M = _as_matrix(X)
    if not 1 <= k < len(M):
        raise ClusterError(f"k={k} out of range for {len(M)} points")
    d = np.sqrt(np.maximum(
        np.sum(M * M, axis=1)[:, None] - 2.0 * (M @ M.T) + np.sum(M * M, axis=1)[None, :], 0.0))
    kth = np.sort(d, axis=1)[:, k]  # column 0 is self-distance
    return np.sort(kth)


def pca_2d_export(X, labels, path: str | Path) -> None:
    """(x, y, label) CSV of a 2-component PCA projection, for external plotting."""
    M = _as_matrix(X)
    centered = M - M.mean(axis=0)
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ Vt[:2].T
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "label"])
        for (x, y), lab in zip(proj, np.asarray(labels)):
            w.writerow([f"{x:.8g}", f"{y:.8g}", int(lab)])
