import math

import numpy as np
import pytest

from citegraph.textprep import PipelineConfig, TokenizedDocument, preprocess
from citegraph.vectorize import (
    DimensionMismatchError,
    EmbeddingStore,
    LookupEmbeddingProvider,
    LsaEmbeddingProvider,
    OutOfVocabularyError,
    SparseVector,
    VectorizeError,
    embed_query,
    fit_lsa,
    fit_tfidf,
    load_embeddings,
    load_lsa_model,
    lsa_transform,
    lsa_transform_matrix,
    save_embeddings,
    save_lsa_model,
    sparse_matrix,
)


def doc(tokens, sid="d"):
    return TokenizedDocument(source_id=sid, tokens=tuple(tokens), pipeline_fingerprint="t")


def diag_vectors(values):
    return [SparseVector(len(values), np.array([i]), np.array([float(v)]))
            for i, v in enumerate(values)]


class TestTfidf:
    def test_hand_computed_weights(self):
        vocab, vecs = fit_tfidf([doc(["a", "b"], "0"), doc(["a", "c"], "1")])
        # idf(a) = ln(3/3)+1 = 1.0; idf(b) = idf(c) = ln(3/2)+1
        idf_b = math.log(3 / 2) + 1
        pre = np.array([1.0, idf_b])
        expected = pre / np.linalg.norm(pre)
        v0 = dict(zip(vecs[0].indices.tolist(), vecs[0].values.tolist()))
        assert v0[vocab.term_to_index["a"]] == pytest.approx(expected[0], rel=1e-9)
        assert v0[vocab.term_to_index["b"]] == pytest.approx(expected[1], rel=1e-9)
        assert v0[vocab.term_to_index["b"]] == pytest.approx(0.8148, abs=1e-4)

    def test_single_term_doc(self):
        _, vecs = fit_tfidf([doc(["a"])])
        assert vecs[0].values.tolist() == [1.0]

    def test_all_docs_empty_is_error(self):
        with pytest.raises(VectorizeError):
            fit_tfidf([doc([]), doc([])])

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        docs = [doc(rng.choice(list("abcdefgh"), size=10).tolist(), str(i)) for i in range(20)]
        _, vecs = fit_tfidf(docs)
        for v in vecs:
            assert np.linalg.norm(v.values) == pytest.approx(1.0, abs=1e-9)
            assert np.all(np.diff(v.indices) > 0)

    def test_vocabulary_invariants(self):
        vocab, _ = fit_tfidf([doc(["a", "b", "a"]), doc(["b"])])
        assert sorted(vocab.term_to_index.values()) == list(range(vocab.size))
        assert np.all(vocab.document_frequency >= 1)
        assert np.all(vocab.document_frequency <= vocab.corpus_size)


class TestLsa:
    def test_diagonal_case(self):
        model = fit_lsa(diag_vectors([4, 3, 2, 1]), r=2, seed=0)
        assert model.singular_values == pytest.approx([4.0, 3.0], rel=1e-9)
        assert model.explained_variance_ratio == pytest.approx([16 / 30, 9 / 30], abs=1e-12)

    def test_full_rank_variance_sums_to_one(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((6, 5))
        vecs = [SparseVector(5, np.arange(5), A[i]) for i in range(6)]
        model = fit_lsa(vecs, r=5, seed=2)
        assert model.explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)

    def test_matches_dense_svd_oracle(self):
        rng = np.random.default_rng(42)
        A = rng.standard_normal((50, 80))
        vecs = [SparseVector(80, np.arange(80), A[i]) for i in range(50)]
        model = fit_lsa(vecs, r=8, oversample=20, power_iters=10, seed=3)
        s_true = np.linalg.svd(A, compute_uv=False)
        assert model.singular_values == pytest.approx(s_true[:8], rel=1e-6)
        # basis agreement up to per-column sign
        _, _, Vt = np.linalg.svd(A)
        for j in range(8):
            dot = abs(float(model.basis[:, j] @ Vt[j]))
            assert dot == pytest.approx(1.0, abs=1e-6)

    def test_basis_orthonormal(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((20, 30))
        vecs = [SparseVector(30, np.arange(30), A[i]) for i in range(20)]
        model = fit_lsa(vecs, r=6, seed=0)
        gram = model.basis.T @ model.basis
        assert np.abs(gram - np.eye(6)).max() < 1e-8

    def test_singular_values_nonincreasing(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((15, 12))
        vecs = [SparseVector(12, np.arange(12), A[i]) for i in range(15)]
        model = fit_lsa(vecs, r=10, seed=0)
        assert np.all(np.diff(model.singular_values) <= 1e-12)
        assert np.all(np.diff(model.explained_variance_ratio) <= 1e-12)

    def test_r_out_of_range(self):
        with pytest.raises(VectorizeError):
            fit_lsa(diag_vectors([1, 2]), r=5)

    def test_all_zero_matrix(self):
        zeros = [SparseVector(3, np.empty(0, dtype=np.int64), np.empty(0)) for _ in range(3)]
        with pytest.raises(VectorizeError):
            fit_lsa(zeros, r=1)

    def test_seeded_reproducibility(self):
        vecs = diag_vectors([5, 4, 3, 2, 1])
        a = fit_lsa(vecs, r=3, seed=9)
        b = fit_lsa(vecs, r=3, seed=9)
        assert np.array_equal(a.basis, b.basis)
        assert np.array_equal(a.singular_values, b.singular_values)


class TestTransform:
    def make_fitted(self):
        docs = [doc(["law", "court", "appeal"], "0"),
                doc(["law", "statute"], "1"),
                doc(["court", "appeal", "appeal"], "2")]
        vocab, tfidf = fit_tfidf(docs)
        model = fit_lsa(tfidf, r=3, seed=0, vocabulary=vocab)
        return docs, tfidf, model

    def test_training_doc_reproduces_row(self):
        docs, tfidf, model = self.make_fitted()
        rows = lsa_transform_matrix(model, tfidf)
        for i, d in enumerate(docs):
            assert lsa_transform(model, d) == pytest.approx(rows[i], abs=1e-6)

    def test_oov_doc_is_error(self):
        _, _, model = self.make_fitted()
        with pytest.raises(OutOfVocabularyError):
            lsa_transform(model, doc(["zebra", "xylophone"]))

    def test_determinism(self):
        _, _, model = self.make_fitted()
        a = lsa_transform(model, doc(["law", "court"]))
        b = lsa_transform(model, doc(["law", "court"]))
        assert np.array_equal(a, b)

    def test_partial_oov_dropped_silently(self):
        _, _, model = self.make_fitted()
        a = lsa_transform(model, doc(["law", "court", "zebra"]))
        b = lsa_transform(model, doc(["law", "court"]))
        assert a == pytest.approx(b, abs=1e-12)

    def test_save_load_round_trip(self, tmp_path):
        docs, tfidf, model = self.make_fitted()
        save_lsa_model(model, tmp_path / "m")
        again = load_lsa_model(tmp_path / "m")
        assert np.array_equal(again.basis, model.basis)
        assert np.array_equal(again.idf, model.idf)
        assert again.vocabulary.term_to_index == model.vocabulary.term_to_index
        assert lsa_transform(again, docs[0]) == pytest.approx(
            lsa_transform(model, docs[0]), abs=1e-12)


class TestEmbeddings:
    def write(self, path, rows):
        with open(path, "w") as fh:
            for r in rows:
                import json
                fh.write(json.dumps(r) + "\n")

    def test_load_uniform(self, tmp_path):
        p = tmp_path / "e.jsonl"
        self.write(p, [{"id": str(i), "vector": [0.1] * 512} for i in range(3)])
        store = load_embeddings(p)
        assert store.dimension == 512
        assert len(store.vectors) == 3

    def test_ragged_dimension(self, tmp_path):
        p = tmp_path / "e.jsonl"
        self.write(p, [{"id": "a", "vector": [0.1] * 512},
                       {"id": "b", "vector": [0.1] * 511}])
        with pytest.raises(VectorizeError, match="ragged"):
            load_embeddings(p)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "e.jsonl"
        self.write(p, [{"id": "a", "vector": [1.0]}, {"id": "a", "vector": [2.0]}])
        with pytest.raises(VectorizeError, match="'a'"):
            load_embeddings(p)

    def test_non_finite(self, tmp_path):
        p = tmp_path / "e.jsonl"
        self.write(p, [{"id": "a", "vector": [float("nan")]}])
        with pytest.raises(VectorizeError, match="non-finite"):
            load_embeddings(p)

    def test_round_trip(self, tmp_path):
        store = EmbeddingStore(2, {"a": np.array([1.0, 2.0]), "b": np.array([3.0, 4.0])})
        save_embeddings(store, tmp_path / "s.jsonl")
        again = load_embeddings(tmp_path / "s.jsonl")
        assert np.array_equal(again.vectors["b"], [3.0, 4.0])


class TestProviders:
    def test_lsa_provider_matches_corpus_vector(self):
        texts = ["the court held the statute applies",
                 "the appeal was dismissed entirely",
                 "certiorari granted on jurisdiction"]
        cfg = PipelineConfig()
        docs = [preprocess(t, cfg, source_id=str(i)) for i, t in enumerate(texts)]
        vocab, tfidf = fit_tfidf(docs)
        model = fit_lsa(tfidf, r=3, seed=0, vocabulary=vocab)
        rows = lsa_transform_matrix(model, tfidf)
        provider = LsaEmbeddingProvider(model, cfg)
        assert embed_query(provider, texts[1]) == pytest.approx(rows[1], abs=1e-6)

    def test_empty_query(self):
        provider = LookupEmbeddingProvider(2, {"x": [1.0, 2.0]})
        with pytest.raises(VectorizeError):
            embed_query(provider, "   ")

    def test_wrong_dimension_from_provider(self):
        class Bad(LookupEmbeddingProvider):
            def embed(self, text):
                return np.zeros(3)
        provider = Bad(2, {})
        with pytest.raises(DimensionMismatchError):
            embed_query(provider, "x")


def test_sparse_matrix_round_trip():
    vecs = diag_vectors([1, 2, 3])
    M = sparse_matrix(vecs).toarray()
    assert np.array_equal(M, np.diag([1.0, 2.0, 3.0]))
