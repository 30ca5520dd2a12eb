"""Two-track citation retrieval: global cosine top-1 plus within-predicted-
cluster Euclidean neighbors, merged into 5 distinct ranked citations."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import classify
from .cluster import ClusterModel
from .corpus import CaseRecord, Corpus
from .serialize import read_f64le, read_json, write_f64le, write_json
from .vectorize import EmbeddingProvider, embed_query

COSINE_TOP1 = "cosine_top1"
CLUSTER_NEIGHBOR = "cluster_neighbor"


class RetrieveError(Exception):
    pass


@dataclass(frozen=True)
class CitationResult:
    record: CaseRecord
    track: str            # cosine_top1 | cluster_neighbor
    raw_score: float      # cosine in [-1,1] or Euclidean distance >= 0
    relevance_pct: int    # 0..100


@dataclass(frozen=True)
class RetrievalIndex:
    vectors: np.ndarray               # N x d
    records: tuple[CaseRecord, ...]
    cluster_labels: np.ndarray        # length N
    cluster_model: ClusterModel
    classifier: object
    vectorizer: EmbeddingProvider
    build_fingerprint: str
    median_cluster_dist: dict[int, float]

    def __len__(self) -> int:
        return len(self.records)


def _fingerprint(vectors: np.ndarray, labels: np.ndarray, records, classifier_meta: str) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(vectors, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(labels, dtype="<i8").tobytes())
    h.update("\x00".join(r.id for r in records).encode("utf-8"))
    h.update(classifier_meta.encode("utf-8"))
    return h.hexdigest()


def _median_intra_cluster_distances(vectors, labels) -> dict[int, float]:
    out = {}
    for c in np.unique(labels):
        if c < 0:
            continue
        members = vectors[labels == c]
        if len(members) < 2:
            out[int(c)] = 1.0
            continue
        d2 = (np.sum(members**2, axis=1)[:, None] - 2.0 * (members @ members.T)
              + np.sum(members**2, axis=1)[None, :])
        d = np.sqrt(np.maximum(d2, 0.0))
        pairs = d[np.triu_indices(len(members), k=1)]
        med = float(np.median(pairs))
        out[int(c)] = med if med > 0 else 1.0
    return out


def build_index(corpus: Corpus, vectors: np.ndarray, vectorizer: EmbeddingProvider,
                cluster_model: ClusterModel, classifier) -> RetrievalIndex:
    """Bind corpus, vectors, cluster labels, and classifier into one queryable snapshot."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n = len(corpus.records)
    if n < 1:
        raise RetrieveError("cannot build an index over an empty corpus")
    if vectors.shape[0] != n:
        raise RetrieveError(f"vector count {vectors.shape[0]} != record count {n}")
    if len(cluster_model.labels) != n:
        raise RetrieveError(f"cluster label count {len(cluster_model.labels)} != record count {n}")
    if vectors.shape[1] != vectorizer.dimension:
        raise RetrieveError(
            f"vector dimension {vectors.shape[1]} != vectorizer dimension {vectorizer.dimension}")
    classes = classify.class_count_of(classifier)
    if classes != cluster_model.k:
        raise RetrieveError(
            f"classifier class count {classes} != cluster count {cluster_model.k}")
    labels = np.asarray(cluster_model.labels, dtype=np.int64)
    fp = _fingerprint(vectors, labels, corpus.records, f"{type(classifier).__name__}:{classes}")
    return RetrievalIndex(
        vectors=vectors, records=corpus.records, cluster_labels=labels,
        cluster_model=cluster_model, classifier=classifier, vectorizer=vectorizer,
        build_fingerprint=fp,
        median_cluster_dist=_median_intra_cluster_distances(vectors, labels),
    )


def cosine_relevance(cos: float) -> int:
    return int(round(100.0 * max(0.0, min(1.0, cos))))


def euclidean_relevance(dist: float, median_dist: float) -> int:
    return int(round(100.0 * np.exp(-dist / median_dist)))


def cosine_top1(index: RetrievalIndex, q: np.ndarray) -> CitationResult:
    """Most cosine-similar corpus document; ties go to the lowest corpus position."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.vectors.shape[1],):
        raise RetrieveError(f"query dimension {q.shape} != index dimension {index.vectors.shape[1]}")
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        raise RetrieveError("zero-norm query vector")
    norms = np.linalg.norm(index.vectors, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (index.vectors @ q) / (norms * qn)
    cos[norms == 0.0] = -np.inf  # zero-norm corpus vectors skipped
    best = int(np.argmax(cos))   # argmax returns the first (lowest) position on ties
    score = float(cos[best])
    return CitationResult(record=index.records[best], track=COSINE_TOP1,
                          raw_score=score, relevance_pct=cosine_relevance(score))


def cluster_neighbors(index: RetrievalIndex, q: np.ndarray, n: int = 4) -> list[CitationResult]:
    """The n Euclidean-nearest members of the classifier-predicted cluster."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.vectors.shape[1],):
        raise RetrieveError(f"query dimension {q.shape} != index dimension {index.vectors.shape[1]}")
    label = int(classify.predict_any(index.classifier, q[None, :])[0])
    members = np.flatnonzero(index.cluster_labels == label)
    if len(members) == 0:
        raise RetrieveError(f"predicted cluster {label} has no members in the index")
    d = np.linalg.norm(index.vectors[members] - q, axis=1)
    order = np.argsort(d, kind="stable")[:n]
    med = index.median_cluster_dist.get(label, 1.0)
    return [
        CitationResult(record=index.records[members[i]], track=CLUSTER_NEIGHBOR,
                       raw_score=float(d[i]), relevance_pct=euclidean_relevance(float(d[i]), med))
        for i in order
    ]


def retrieve_citations(index: RetrievalIndex, raw_text: str) -> list[CitationResult]:
    """Cosine top-1 followed by 4 within-cluster neighbors, deduplicated to
    min(5, N) distinct records."""
    if not raw_text.strip():
        raise RetrieveError("empty query text")
    q = embed_query(index.vectorizer, raw_text)
    top = cosine_top1(index, q)
    results = [top]
    seen = {top.record.id}

    label = int(classify.predict_any(index.classifier, q[None, :])[0])
    members = np.flatnonzero(index.cluster_labels == label)
    d = np.linalg.norm(index.vectors[members] - q, axis=1)
    med = index.median_cluster_dist.get(label, 1.0)
    for i in np.argsort(d, kind="stable"):
        if len(results) >= 5:
            break
        rec = index.records[members[i]]
        if rec.id in seen:
            continue
        seen.add(rec.id)
        results.append(CitationResult(record=rec, track=CLUSTER_NEIGHBOR,
                                      raw_score=float(d[i]),
                                      relevance_pct=euclidean_relevance(float(d[i]), med)))
    if len(results) < min(5, len(index)):
        # cluster exhausted: backfill from the global cosine ranking
        qn = float(np.linalg.norm(q))
        norms = np.linalg.norm(index.vectors, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = (index.vectors @ q) / (norms * qn)
        cos[norms == 0.0] = -np.inf
        for i in np.argsort(-cos, kind="stable"):
            if len(results) >= min(5, len(index)):
                break
            rec = index.records[int(i)]
            if rec.id in seen:
                continue
            seen.add(rec.id)
            score = float(cos[i])
            results.append(CitationResult(record=rec, track=COSINE_TOP1,
                                          raw_score=score,
                                          relevance_pct=cosine_relevance(score)))
    return results


# ---------------------------------------------------------------------------
# index artifact persistence (classifier and vectorizer are stored separately)

def save_index_data(index: RetrievalIndex, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_f64le(d / "vectors.f64le", index.vectors)
    write_json(d / "vectors.shape.json", {"rows": index.vectors.shape[0],
                                          "cols": index.vectors.shape[1]})
    with (d / "records.jsonl").open("w", encoding="utf-8") as fh:
        for r in index.records:
            obj = {"id": r.id, "case_name": r.case_name, "justice": r.justice,
                   "year": r.year, "category": r.category, "url": r.source_url,
                   "scdb_id": r.scdb_id, "description": r.description}
            obj.update(r.extra)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    write_json(d / "labels.json", [int(x) for x in index.cluster_labels])
    write_json(d / "manifest.json", {
        "build_fingerprint": index.build_fingerprint,
        "n": len(index), "dimension": int(index.vectors.shape[1]),
        "cluster_count": index.cluster_model.k,
        "cluster_algorithm": index.cluster_model.algorithm,
        "median_cluster_dist": {str(k): v for k, v in index.median_cluster_dist.items()},
        "vectorizer_tag": index.vectorizer.tag,
    })
