"""Document vectors: TF-IDF weighting, truncated-SVD semantic reduction, and
ingestion of externally computed sentence embeddings.

The SVD is a seeded randomized range-finder (Gaussian test matrix, subspace
power iterations with QR re-orthonormalization, exact SVD of the projected
small matrix), so fitting stays tractable at vocabulary sizes around 1e5.
"""

from __future__ import annotations

import json
import logging
import math
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .serialize import read_f64le, read_json, write_f64le, write_json
from .textprep import PipelineConfig, TokenizedDocument, preprocess

log = logging.getLogger(__name__)


class VectorizeError(Exception):
    pass


class OutOfVocabularyError(VectorizeError):
    """Document or query has no term in the fitted vocabulary."""


class DimensionMismatchError(VectorizeError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    term_to_index: dict[str, int]
    document_frequency: np.ndarray  # per-term df, aligned with indices
    corpus_size: int

    @property
    def size(self) -> int:
        return len(self.term_to_index)


@dataclass(frozen=True)
class SparseVector:
    dimension: int
    indices: np.ndarray  # strictly increasing int64
    values: np.ndarray   # float64, no explicit zeros


@dataclass(frozen=True)
class LsaModel:
    vocabulary: Vocabulary
    idf: np.ndarray
    basis: np.ndarray               # V x r, orthonormal columns
    singular_values: np.ndarray     # length r, nonincreasing
    explained_variance_ratio: np.ndarray
    r: int
    seed: int
    oversample: int
    power_iters: int

    @property
    def dimension(self) -> int:
        return self.r


def smoothed_idf(df: np.ndarray, n_docs: int) -> np.ndarray:
    return np.log((1.0 + n_docs) / (1.0 + df)) + 1.0


def fit_tfidf(docs: Sequence[TokenizedDocument]) -> tuple[Vocabulary, list[SparseVector]]:
    """Raw-count TF x smoothed IDF, each document L2-normalized."""
    if not docs:
        raise VectorizeError("fit_tfidf needs at least one document")
    if all(len(d.tokens) == 0 for d in docs):
        raise VectorizeError("all documents are empty after preprocessing")

    terms = sorted({t for d in docs for t in d.tokens})
    term_to_index = {t: i for i, t in enumerate(terms)}
    V = len(terms)
    df = np.zeros(V, dtype=np.int64)
    for d in docs:
        for t in set(d.tokens):
            df[term_to_index[t]] += 1
    vocab = Vocabulary(term_to_index=term_to_index, document_frequency=df, corpus_size=len(docs))
    idf = smoothed_idf(df.astype(np.float64), len(docs))

    vectors = []
    for d in docs:
        vectors.append(_weight_tokens(d.tokens, term_to_index, idf, V))
    return vocab, vectors


def _weight_tokens(tokens, term_to_index, idf, dimension) -> SparseVector:
    counts: dict[int, int] = {}
    for t in tokens:
        idx = term_to_index.get(t)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVector(dimension=dimension,
                            indices=np.empty(0, dtype=np.int64),
                            values=np.empty(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64) * idf[indices]
    norm = float(np.linalg.norm(values))
    if norm > 0:
        values = values / norm
    return SparseVector(dimension=dimension, indices=indices, values=values)


def sparse_matrix(vectors: Sequence[SparseVector]) -> sp.csr_matrix:
    if not vectors:
        raise VectorizeError("no vectors")
    dim = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        if v.dimension != dim:
            raise DimensionMismatchError(f"vector {i} has dimension {v.dimension}, expected {dim}")
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.empty(0, dtype=np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.empty(0, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def _flip_signs(basis: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive, for run-to-run comparability
    flip = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(basis.shape[1])])
    flip[flip == 0] = 1.0
    return basis * flip


def fit_lsa(tfidf_vectors: Sequence[SparseVector], r: int, oversample: int = 10,
            power_iters: int = 4, seed: int = 0,
            vocabulary: Vocabulary | None = None) -> LsaModel:
    """Rank-r truncated SVD of the document-term matrix via randomized projection."""
    X = sparse_matrix(tfidf_vectors)
    n, v = X.shape
    if not 1 <= r <= min(n, v):
        raise VectorizeError(f"r={r} out of range 1..{min(n, v)}")
    fro2 = float(X.multiply(X).sum())
    if fro2 == 0.0:
        raise VectorizeError("degenerate all-zero matrix")

    rng = np.random.default_rng(seed)
    width = min(r + oversample, min(n, v))
    omega = rng.standard_normal((v, width))
    Q, _ = np.linalg.qr(X @ omega)
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(X.T @ Q)
        Q, _ = np.linalg.qr(X @ Z)
    B = Q.T @ X  # width x v, dense
    _, s, Vt = np.linalg.svd(np.asarray(B), full_matrices=False)

    basis = _flip_signs(Vt[:r].T.copy())
    singular_values = s[:r].copy()
    evr = singular_values**2 / fro2

    idf = (smoothed_idf(vocabulary.document_frequency.astype(np.float64), vocabulary.corpus_size)
           if vocabulary is not None else np.empty(0))
    vocab = vocabulary if vocabulary is not None else Vocabulary({}, np.empty(0, dtype=np.int64), n)
    return LsaModel(vocabulary=vocab, idf=idf, basis=basis,
                    singular_values=singular_values, explained_variance_ratio=evr,
                    r=r, seed=seed, oversample=oversample, power_iters=power_iters)


def lsa_transform(model: LsaModel, doc: TokenizedDocument) -> np.ndarray:
    """Project one document into the fitted semantic space."""
    if not model.vocabulary.term_to_index:
        raise VectorizeError("model was fitted without a vocabulary; cannot transform raw documents")
    vec = _weight_tokens(doc.tokens, model.vocabulary.term_to_index, model.idf,
                         model.vocabulary.size)
    if len(vec.indices) == 0:
        raise OutOfVocabularyError(f"document {doc.source_id!r} has no in-vocabulary terms")
    dropped = len([t for t in doc.tokens if t not in model.vocabulary.term_to_index])
    if dropped:
        log.debug("dropped %d out-of-vocabulary tokens for %s", dropped, doc.source_id)
    return (vec.values[None, :] @ model.basis[vec.indices, :])[0]


def lsa_transform_matrix(model: LsaModel, tfidf_vectors: Sequence[SparseVector]) -> np.ndarray:
    """Project already-weighted document vectors; rows align with input order."""
    X = sparse_matrix(tfidf_vectors)
    if X.shape[1] != model.basis.shape[0]:
        raise DimensionMismatchError(f"matrix has {X.shape[1]} columns, basis expects {model.basis.shape[0]}")
    return np.asarray(X @ model.basis)


# ---------------------------------------------------------------------------
# model artifact persistence

def save_lsa_model(model: LsaModel, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with (d / "vocabulary.jsonl").open("w", encoding="utf-8") as fh:
        for term, idx in sorted(model.vocabulary.term_to_index.items(), key=lambda kv: kv[1]):
            fh.write(json.dumps({"term": term, "index": idx,
                                 "df": int(model.vocabulary.document_frequency[idx])}) + "\n")
    write_f64le(d / "idf.f64le", model.idf)
    write_f64le(d / "basis.f64le", model.basis)
    write_json(d / "shape.json", {"rows": model.basis.shape[0], "cols": model.basis.shape[1], "r": model.r})
    write_f64le(d / "singular_values.f64le", model.singular_values)
    write_json(d / "meta.json", {
        "seed": model.seed,
        "oversample": model.oversample,
        "power_iters": model.power_iters,
        "corpus_size": model.vocabulary.corpus_size,
        "explained_variance_ratio": [float(x) for x in model.explained_variance_ratio],
    })


def load_lsa_model(directory: str | Path) -> LsaModel:
    d = Path(directory)
    term_to_index = {}
    dfs = {}
    with (d / "vocabulary.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                term_to_index[obj["term"]] = obj["index"]
                dfs[obj["index"]] = obj["df"]
    df = np.array([dfs[i] for i in range(len(dfs))], dtype=np.int64)
    shape = read_json(d / "shape.json")
    meta = read_json(d / "meta.json")
    vocab = Vocabulary(term_to_index=term_to_index, document_frequency=df,
                       corpus_size=meta["corpus_size"])
    return LsaModel(
        vocabulary=vocab,
        idf=read_f64le(d / "idf.f64le"),
        basis=read_f64le(d / "basis.f64le", shape=(shape["rows"], shape["cols"])),
        singular_values=read_f64le(d / "singular_values.f64le"),
        explained_variance_ratio=np.array(meta["explained_variance_ratio"]),
        r=shape["r"], seed=meta["seed"], oversample=meta["oversample"],
        power_iters=meta["power_iters"],
    )


# ---------------------------------------------------------------------------
# external sentence embeddings

@dataclass(frozen=True)
class EmbeddingStore:
    dimension: int
    vectors: dict[str, np.ndarray]
    provider_tag: str = "file"


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read the JSONL exchange format: one {"id", "vector"} object per line."""
    path = Path(path)
    if not path.exists():
        raise VectorizeError(f"embedding file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    with path.open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            obj = json.loads(line)
            sid = str(obj["id"])
            vec = np.asarray(obj["vector"], dtype=np.float64)
            if sid in vectors:
                raise VectorizeError(f"duplicate embedding id {sid!r} at row {i}")
            if not np.all(np.isfinite(vec)):
                raise VectorizeError(f"non-finite embedding values for id {sid!r} at row {i}")
            if dimension is None:
                dimension = len(vec)
            elif len(vec) != dimension:
                raise VectorizeError(
                    f"ragged dimensions: id {sid!r} has {len(vec)}, expected {dimension}")
            vectors[sid] = vec
    if dimension is None:
        raise VectorizeError(f"embedding file is empty: {path}")
    return EmbeddingStore(dimension=dimension, vectors=vectors, provider_tag=str(path))


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sid, vec in store.vectors.items():
            fh.write(json.dumps({"id": sid, "vector": [float(x) for x in vec]}) + "\n")


# ---------------------------------------------------------------------------
# query embedding providers

class EmbeddingProvider:
    """Anything that can turn query text into a vector of a fixed dimension."""

    dimension: int
    tag: str = "provider"

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class LsaEmbeddingProvider(EmbeddingProvider):
    """Preprocess + TF-IDF weight + semantic projection, mirroring corpus vectors."""

    tag = "tfidf_lsa"

    def __init__(self, model: LsaModel, pipeline: PipelineConfig | None = None):
        self.model = model
        self.pipeline = pipeline if pipeline is not None else PipelineConfig()
        self.dimension = model.r

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise VectorizeError("empty query text")
        doc = preprocess(text, self.pipeline, source_id="<query>")
        return lsa_transform(self.model, doc)


class LookupEmbeddingProvider(EmbeddingProvider):
    """Exact-text lookup table; for tests and replayed corpora."""

    tag = "lookup"

    def __init__(self, dimension: int, table: dict[str, np.ndarray]):
        self.dimension = dimension
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise VectorizeError("empty query text")
        vec = self.table.get(text)
        if vec is None:
            raise VectorizeError("text not present in embedding lookup table")
        return vec


class RemoteEmbeddingProvider(EmbeddingProvider):
    """POSTs {"text": ...} to an embedding endpoint returning {"vector": [...]}."""

    tag = "remote"

    def __init__(self, url: str, dimension: int, timeout: float = 30.0):
        self.url = url
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise VectorizeError("empty query text")
        body = json.dumps({"text": text}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except OSError as e:
            raise VectorizeError(f"embedding provider unreachable: {e}")
        vec = np.asarray(payload["vector"], dtype=np.float64)
        if len(vec) != self.dimension:
            raise DimensionMismatchError(
                f"provider returned dimension {len(vec)}, expected {self.dimension}")
        return vec


def embed_query(provider: EmbeddingProvider, text: str) -> np.ndarray:
    vec = provider.embed(text)
    if len(vec) != provider.dimension:
        raise DimensionMismatchError(
            f"provider produced dimension {len(vec)}, declared {provider.dimension}")
    return vec
