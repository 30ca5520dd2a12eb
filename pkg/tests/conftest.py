import json

import numpy as np
import pytest

from citegraph.corpus import Corpus, load_corpus

TOPIC_WORDS = 40
JUSTICES = ["harlan", "brennan", "marshall", "stevens", "oconnor", "rehnquist"]


def topic_vocab(topic: int) -> list[str]:
    # vocabulary-disjoint by construction: every word carries its topic id
    return [f"term{topic}x{j}" for j in range(TOPIC_WORDS)]


def planted_texts(n_topics: int, docs_per_topic: int, seed: int = 0,
                  tokens_per_doc: int = 60) -> tuple[list[str], list[int]]:
    rng = np.random.default_rng(seed)
    texts, topics = [], []
    for t in range(n_topics):
        vocab = topic_vocab(t)
        for _ in range(docs_per_topic):
            words = rng.choice(vocab, size=tokens_per_doc, replace=True)
            texts.append(" ".join(words))
            topics.append(t)
    return texts, topics


def write_planted_corpus(path, n_topics=3, docs_per_topic=20, seed=0, tokens_per_doc=60):
    texts, topics = planted_texts(n_topics, docs_per_topic, seed, tokens_per_doc)
    with open(path, "w", encoding="utf-8") as fh:
        for i, (text, topic) in enumerate(zip(texts, topics)):
            fh.write(json.dumps({
                "id": f"case-{i:04d}",
                "case_name": f"Case {i} v. Topic {topic}",
                "justice": JUSTICES[topic % len(JUSTICES)],
                "year": 1985 + (i % 30),
                "category": "majority",
                "url": f"https://example.org/case/{i}",
                "scdb_id": f"SCDB-{i:04d}",
                "description": text,
            }) + "\n")
    return texts, topics


def write_planted_embeddings(path, corpus: Corpus, topics, dim=16, seed=0, noise=0.05):
    rng = np.random.default_rng(seed)
    n_topics = max(topics) + 1
    centers = rng.standard_normal((n_topics, dim)) * 3.0
    with open(path, "w", encoding="utf-8") as fh:
        for rec, topic in zip(corpus.records, topics):
            vec = centers[topic] + rng.standard_normal(dim) * noise
            fh.write(json.dumps({"id": rec.id, "vector": [float(x) for x in vec]}) + "\n")


@pytest.fixture
def tiny_corpus_path(tmp_path):
    rows = [
        {"id": "a", "case_name": "Alpha v. Beta", "justice": "harlan", "year": 1986,
         "category": "majority", "url": "https://example.org/a", "scdb_id": "S1",
         "description": "The court held that the statute applies."},
        {"id": "b", "case_name": "Gamma v. Delta", "justice": "brennan", "year": 1990,
         "category": "dissenting", "url": "https://example.org/b", "scdb_id": "S2",
         "description": "The appeal was dismissed for lack of standing."},
        {"id": "c", "case_name": "Epsilon v. Zeta", "justice": "harlan", "year": 1986,
         "category": "majority", "url": "https://example.org/c", "scdb_id": "S3",
         "description": "Certiorari granted on the question of jurisdiction."},
    ]
    path = tmp_path / "tiny.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture
def planted_corpus(tmp_path):
    path = tmp_path / "planted.jsonl"
    texts, topics = write_planted_corpus(path, n_topics=3, docs_per_topic=20, seed=7)
    return load_corpus(path), texts, topics, path
