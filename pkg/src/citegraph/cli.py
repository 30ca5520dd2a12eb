"""Pipeline driver: ingest -> preprocess -> vectorize -> cluster -> train ->
evaluate -> query -> serve, each stage reading and writing a shared artifact
directory guarded by a manifest of content fingerprints."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import classify, cluster, corpus as corpus_mod, retrieve, textprep, vectorize
from .serialize import read_f64le, read_json, write_f64le, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STALE = 3
EXIT_RUNTIME = 4

STAGE_INPUTS = {
    "ingest": [],
    "preprocess": ["corpus.jsonl"],
    "vectorize": ["corpus.jsonl", "tokens.jsonl"],
    "cluster": ["vectors.f64le"],
    "train": ["vectors.f64le", "cluster.json"],
    "evaluate": ["corpus.jsonl", "tokens.jsonl"],
    "query": [],
    "serve": [],
}


class ConfigError(Exception):
    pass


class StaleArtifacts(Exception):
    pass


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _require(cfg: dict, section: str, key: str):
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"config is missing {section}.{key}")


class Manifest:
    def __init__(self, artifacts: Path):
        self.path = artifacts / "manifest.json"
        self.data = read_json(self.path) if self.path.exists() else {"stages": {}}

    def record(self, stage: str, fingerprint: str, config: dict, inputs: dict, outputs: dict,
               seed) -> None:
        self.data["stages"][stage] = {
            "fingerprint": fingerprint, "config": config, "inputs": inputs,
            "outputs": outputs, "seed": seed, "timestamp": time.time(),
        }
        write_json(self.path, self.data)

    def stage(self, name: str):
        return self.data["stages"].get(name)


def _stage_fingerprint(config: dict, input_hashes: dict) -> str:
    blob = json.dumps({"config": config, "inputs": input_hashes}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _check_inputs(stage: str, artifacts: Path, manifest: Manifest) -> dict:
    """Hash declared inputs; verify they match what their producing stage recorded."""
    hashes = {}
    producer = {"corpus.jsonl": "ingest", "tokens.jsonl": "preprocess",
                "vectors.f64le": "vectorize", "cluster.json": "cluster"}
    for name in STAGE_INPUTS[stage]:
        path = artifacts / name
        if not path.exists():
            raise StaleArtifacts(
                f"stage {stage!r} needs {name}; run the {producer[name]!r} stage first")
        digest = _hash_file(path)
        prod = manifest.stage(producer[name])
        if prod is None:
            raise StaleArtifacts(
                f"{name} exists but stage {producer[name]!r} is not in the manifest; rerun it")
        recorded = prod["outputs"].get(name)
        if recorded is not None and recorded != digest:
            raise StaleArtifacts(
                f"{name} on disk does not match the manifest entry from stage "
                f"{producer[name]!r}; artifacts are stale")
        hashes[name] = digest
    return hashes


def _pipeline_config(cfg: dict) -> textprep.PipelineConfig:
    tp = cfg.get("textprep", {})
    stopwords = textprep.DEFAULT_STOPWORDS
    if tp.get("stopwords_path"):
        stopwords = textprep.load_stopwords(tp["stopwords_path"])
    contractions = textprep.DEFAULT_CONTRACTIONS
    if tp.get("contractions_path"):
        contractions = textprep.load_contractions(tp["contractions_path"])
    return textprep.PipelineConfig(
        stopword_list=stopwords,
        expand_contractions=tp.get("expand_contractions", True),
        numbers_to_words=tp.get("numbers_to_words", True),
        preserve_section_refs=tp.get("preserve_section_refs", True),
        lemmatize=tp.get("lemmatize", True),
        contraction_table=contractions,
    )


def _read_tokens(artifacts: Path) -> list[textprep.TokenizedDocument]:
    docs = []
    with (artifacts / "tokens.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                docs.append(textprep.TokenizedDocument(
                    source_id=obj["id"], tokens=tuple(obj["tokens"]),
                    pipeline_fingerprint=obj["fingerprint"]))
    return docs


def _embedding_vectors(cfg: dict, corp: corpus_mod.Corpus) -> np.ndarray:
    path = _require(cfg, "vectorize", "embeddings_path")
    store = vectorize.load_embeddings(path)
    missing = [r.id for r in corp.records if r.id not in store.vectors]
    if missing:
        raise ConfigError(f"embeddings file lacks vectors for {len(missing)} corpus ids "
                          f"(first: {missing[0]!r})")
    return np.stack([store.vectors[r.id] for r in corp.records])


def _track_vectors(track: str, cfg: dict, artifacts: Path, corp, docs, seed: int) -> np.ndarray:
    if track == "tfidf_lsa":
        vz = cfg.get("vectorize", {})
        vocab, tfidf = vectorize.fit_tfidf(docs)
        r = min(int(vz.get("r", 20)), len(docs), vocab.size)
        model = vectorize.fit_lsa(tfidf, r=r, oversample=int(vz.get("oversample", 10)),
                                  power_iters=int(vz.get("power_iters", 4)),
                                  seed=seed, vocabulary=vocab)
        return vectorize.lsa_transform_matrix(model, tfidf)
    if track == "embedding":
        return _embedding_vectors(cfg, corp)
    raise ConfigError(f"unknown vectorize track {track!r}")


def _fit_family(family: str, train_ds: classify.LabeledDataset, params: dict, seed: int):
    if family == "knn":
        return classify.knn_fit(train_ds, k=int(params.get("k", 5)))
    if family == "mlp":
        return classify.mlp_fit(train_ds, hidden=int(params.get("hidden", 128)),
                                epochs=int(params.get("epochs", 300)),
                                lr=float(params.get("lr", 0.05)),
                                batch=int(params.get("batch", 32)), seed=seed)
    if family == "svm":
        return classify.svm_fit(train_ds, C=float(params.get("C", 1.0)),
                                kernel=params.get("kernel", "linear"),
                                gamma=float(params.get("gamma", 1.0)),
                                epochs=int(params.get("epochs", 50)), seed=seed)
    raise ConfigError(f"unknown classifier family {family!r}")


# ---------------------------------------------------------------------------
# stage implementations

def stage_ingest(cfg: dict, artifacts: Path, seed: int) -> dict:
    path = _require(cfg, "corpus", "path")
    corp = corpus_mod.load_corpus(path, cfg["corpus"].get("format"))
    if cfg["corpus"].get("min_year") is not None:
        corp = corpus_mod.filter_by_min_year(corp, int(cfg["corpus"]["min_year"]))
    if cfg["corpus"].get("min_tokens") is not None:
        corp = corpus_mod.drop_short_descriptions(corp, int(cfg["corpus"]["min_tokens"]))
    corpus_mod.save_corpus(corp, artifacts / "corpus.jsonl")
    write_json(artifacts / "corpus_stats.json", corpus_mod.corpus_stats(corp))
    write_json(artifacts / "provenance.json", list(corp.provenance))
    return {"corpus.jsonl": _hash_file(artifacts / "corpus.jsonl")}


def stage_preprocess(cfg: dict, artifacts: Path, seed: int) -> dict:
    corp = corpus_mod.load_corpus(artifacts / "corpus.jsonl")
    pipeline = _pipeline_config(cfg)
    with (artifacts / "tokens.jsonl").open("w", encoding="utf-8") as fh:
        for rec in corp.records:
            doc = textprep.preprocess(rec.description, pipeline, source_id=rec.id)
            fh.write(json.dumps({"id": doc.source_id, "tokens": list(doc.tokens),
                                 "fingerprint": doc.pipeline_fingerprint}) + "\n")
    return {"tokens.jsonl": _hash_file(artifacts / "tokens.jsonl")}


def stage_vectorize(cfg: dict, artifacts: Path, seed: int) -> dict:
    vz = cfg.get("vectorize", {})
    track = vz.get("track", "tfidf_lsa")
    corp = corpus_mod.load_corpus(artifacts / "corpus.jsonl")
    docs = _read_tokens(artifacts)
    if track == "tfidf_lsa":
        vocab, tfidf = vectorize.fit_tfidf(docs)
        r = min(int(vz.get("r", 20)), len(docs), vocab.size)
        model = vectorize.fit_lsa(tfidf, r=r, oversample=int(vz.get("oversample", 10)),
                                  power_iters=int(vz.get("power_iters", 4)),
                                  seed=seed, vocabulary=vocab)
        vectorize.save_lsa_model(model, artifacts / "lsa_model")
        vectors = vectorize.lsa_transform_matrix(model, tfidf)
    elif track == "embedding":
        vectors = _embedding_vectors(cfg, corp)
    else:
        raise ConfigError(f"unknown vectorize track {track!r}")
    write_f64le(artifacts / "vectors.f64le", vectors)
    write_json(artifacts / "vectors.shape.json",
               {"rows": vectors.shape[0], "cols": vectors.shape[1], "track": track})
    return {"vectors.f64le": _hash_file(artifacts / "vectors.f64le")}


def stage_cluster(cfg: dict, artifacts: Path, seed: int) -> dict:
    cl = cfg.get("cluster", {})
    shape = read_json(artifacts / "vectors.shape.json")
    X = read_f64le(artifacts / "vectors.f64le", shape=(shape["rows"], shape["cols"]))
    algorithm = cl.get("algorithm", "kmeans")
    if algorithm == "kmeans":
        model = cluster.kmeans_fit(X, k=int(cl.get("k", 6)), seed=seed,
                                   n_restarts=int(cl.get("n_restarts", 10)))
    elif algorithm == "dbscan":
        model = cluster.dbscan_fit(X, eps=float(cl.get("eps", 0.5)),
                                   min_pts=int(cl.get("min_pts", 5)))
    else:
        raise ConfigError(f"unknown clustering algorithm {algorithm!r}")
    payload = {"algorithm": model.algorithm, "k": model.k,
               "labels": [int(x) for x in model.labels],
               "wcss": model.wcss, "iterations_run": model.iterations_run, "seed": model.seed}
    write_json(artifacts / "cluster.json", payload)
    if model.centroids is not None:
        write_f64le(artifacts / "centroids.f64le", model.centroids)
    if cl.get("scan"):
        curve = cluster.scan_k(X, int(cl["scan"].get("k_min", 2)),
                               int(cl["scan"].get("k_max", min(10, len(X)))),
                               metric=cl["scan"].get("metric", "wcss"), seed=seed)
        curve.to_csv(artifacts / f"scan_{curve.metric}.csv")
    cluster.pca_2d_export(X, model.labels, artifacts / "pca2d.csv")
    return {"cluster.json": _hash_file(artifacts / "cluster.json")}


def _load_cluster_model(artifacts: Path) -> cluster.ClusterModel:
    payload = read_json(artifacts / "cluster.json")
    centroids_path = artifacts / "centroids.f64le"
    centroids = None
    if centroids_path.exists():
        shape = read_json(artifacts / "vectors.shape.json")
        centroids = read_f64le(centroids_path, shape=(payload["k"], shape["cols"]))
    return cluster.ClusterModel(algorithm=payload["algorithm"], k=payload["k"],
                                labels=np.array(payload["labels"], dtype=np.int64),
                                centroids=centroids, wcss=payload["wcss"],
                                iterations_run=payload["iterations_run"], seed=payload["seed"])


def stage_train(cfg: dict, artifacts: Path, seed: int) -> dict:
    tr = cfg.get("train", {})
    shape = read_json(artifacts / "vectors.shape.json")
    X = read_f64le(artifacts / "vectors.f64le", shape=(shape["rows"], shape["cols"]))
    cm = _load_cluster_model(artifacts)
    mask = cm.labels >= 0  # DBSCAN noise excluded from training
    dataset = classify.LabeledDataset(X[mask], cm.labels[mask], cm.k)
    sp = tr.get("split", {})
    spec = classify.SplitSpec(train_fraction=float(sp.get("train_fraction", 0.67)),
                              seed=int(sp.get("seed", seed)),
                              stratified=bool(sp.get("stratified", True)))
    train_ds, test_ds = classify.split(dataset, spec)
    family = tr.get("family", "mlp")
    model = _fit_family(family, train_ds, tr.get("params", {}), seed)
    classify.save_classifier(model, artifacts / "classifier")
    report = {
        "family": family,
        "train_accuracy": classify.accuracy(classify.predict_any(model, train_ds.vectors),
                                            train_ds.labels),
        "test_accuracy": classify.accuracy(classify.predict_any(model, test_ds.vectors),
                                           test_ds.labels),
        "train_size": len(train_ds), "test_size": len(test_ds),
    }
    write_json(artifacts / "train_report.json", report)
    return {"classifier/classifier.json": _hash_file(artifacts / "classifier" / "classifier.json")}


def stage_evaluate(cfg: dict, artifacts: Path, seed: int) -> dict:
    ev = cfg.get("evaluate", {})
    tracks = ev.get("tracks", ["tfidf_lsa"])
    families = ev.get("models", ["knn", "svm", "mlp"])
    corp = corpus_mod.load_corpus(artifacts / "corpus.jsonl")
    docs = _read_tokens(artifacts)
    sp = ev.get("split", {})
    spec = classify.SplitSpec(train_fraction=float(sp.get("train_fraction", 0.67)),
                              seed=int(sp.get("seed", seed)),
                              stratified=bool(sp.get("stratified", True)))
    rows = []
    for track in tracks:
        X = _track_vectors(track, cfg, artifacts, corp, docs, seed)
        k = int(cfg.get("cluster", {}).get("k", 6))
        cm = cluster.kmeans_fit(X, k=k, seed=seed,
                                n_restarts=int(cfg.get("cluster", {}).get("n_restarts", 10)))
        dataset = classify.LabeledDataset(X, cm.labels, cm.k)
        train_ds, test_ds = classify.split(dataset, spec)
        for family in families:
            params = ev.get("params", {}).get(family, cfg.get("train", {}).get("params", {}))
            model = _fit_family(family, train_ds, params, seed)
            acc = classify.accuracy(classify.predict_any(model, test_ds.vectors), test_ds.labels)
            rows.append((family, track, acc))
    with (artifacts / "evaluate.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "vectorizer", "accuracy"])
        for family, track, acc in rows:
            w.writerow([family, track, f"{acc:.6f}"])
    return {"evaluate.csv": _hash_file(artifacts / "evaluate.csv")}


def build_index_from_artifacts(cfg: dict, artifacts: Path) -> retrieve.RetrievalIndex:
    corp = corpus_mod.load_corpus(artifacts / "corpus.jsonl")
    shape = read_json(artifacts / "vectors.shape.json")
    X = read_f64le(artifacts / "vectors.f64le", shape=(shape["rows"], shape["cols"]))
    cm = _load_cluster_model(artifacts)
    classifier = classify.load_classifier(artifacts / "classifier")
    track = shape.get("track", "tfidf_lsa")
    if track == "tfidf_lsa":
        model = vectorize.load_lsa_model(artifacts / "lsa_model")
        provider = vectorize.LsaEmbeddingProvider(model, _pipeline_config(cfg))
    else:
        url = cfg.get("vectorize", {}).get("provider_url")
        if url:
            provider = vectorize.RemoteEmbeddingProvider(url, dimension=X.shape[1])
        else:
            table = {rec.description: X[i] for i, rec in enumerate(corp.records)}
            provider = vectorize.LookupEmbeddingProvider(X.shape[1], table)
    return retrieve.build_index(corp, X, provider, cm, classifier)


def stage_query(cfg: dict, artifacts: Path, seed: int, text_path: str | None = None) -> dict:
    if not text_path:
        raise ConfigError("query stage needs --text <file>")
    text = Path(text_path).read_text(encoding="utf-8")
    index = build_index_from_artifacts(cfg, artifacts)
    results = retrieve.retrieve_citations(index, text)
    for i, r in enumerate(results, start=1):
        click.echo(f"{i}. [{r.track}] {r.record.id} {r.record.case_name} "
                   f"({r.record.year}) relevance={r.relevance_pct}%")
    return {}


def stage_serve(cfg: dict, artifacts: Path, seed: int) -> dict:
    import uvicorn

    from .service import ServiceConfig, create_app
    service_cfg = ServiceConfig(**{k: tuple(v) if k == "domain_allowlist" else v
                                   for k, v in cfg.get("service", {}).items()
                                   if k in ServiceConfig.__dataclass_fields__})
    index = build_index_from_artifacts(cfg, artifacts)
    app = create_app(index, service_cfg)
    uvicorn.run(app, host=service_cfg.host, port=service_cfg.port)
    return {}


STAGES = {
    "ingest": stage_ingest,
    "preprocess": stage_preprocess,
    "vectorize": stage_vectorize,
    "cluster": stage_cluster,
    "train": stage_train,
    "evaluate": stage_evaluate,
}


def run_stage(stage: str, config_path: str, artifacts_dir: str, seed: int | None,
              text_path: str | None = None, force: bool = False) -> int:
    try:
        cfg = _load_config(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    artifacts = Path(artifacts_dir)
    artifacts.mkdir(parents=True, exist_ok=True)
    if seed is None:
        seed = int(cfg.get("seed", 0))

    lock = artifacts / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        click.echo(f"artifact directory is locked by another run ({lock})", err=True)
        return EXIT_RUNTIME
    os.close(fd)
    try:
        manifest = Manifest(artifacts)
        if stage in ("query", "serve"):
            fn = stage_query if stage == "query" else stage_serve
            try:
                fn(cfg, artifacts, seed, text_path) if stage == "query" else fn(cfg, artifacts, seed)
            except ConfigError as e:
                click.echo(f"config error: {e}", err=True)
                return EXIT_CONFIG
            except FileNotFoundError as e:
                click.echo(f"missing artifact: {e}", err=True)
                return EXIT_STALE
            return EXIT_OK

        stage_cfg = {k: cfg.get(k) for k in ("corpus", "textprep", "vectorize", "cluster",
                                             "train", "evaluate") if k in cfg}
        try:
            input_hashes = _check_inputs(stage, artifacts, manifest)
        except StaleArtifacts as e:
            click.echo(f"stale artifacts: {e}", err=True)
            return EXIT_STALE
        fingerprint = _stage_fingerprint({"stage": stage, "cfg": stage_cfg, "seed": seed},
                                         input_hashes)
        prior = manifest.stage(stage)
        if not force and prior and prior["fingerprint"] == fingerprint and all(
                (artifacts / name).exists() and _hash_file(artifacts / name) == digest
                for name, digest in prior["outputs"].items()):
            click.echo(f"stage {stage!r} is up to date")
            return EXIT_OK
        try:
            outputs = STAGES[stage](cfg, artifacts, seed)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            return EXIT_CONFIG
        except Exception as e:
            click.echo(f"stage {stage!r} failed: {type(e).__name__}: {e}", err=True)
            return EXIT_RUNTIME
        manifest.record(stage, fingerprint, stage_cfg, input_hashes, outputs, seed)
        click.echo(f"stage {stage!r} complete")
        return EXIT_OK
    finally:
        lock.unlink(missing_ok=True)


@click.command()
@click.argument("stage", type=click.Choice(list(STAGES) + ["query", "serve"]))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--artifacts", "artifacts_dir", default="artifacts", type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--text", "text_path", type=click.Path(), default=None,
              help="Query text file (query stage only).")
@click.option("--force", is_flag=True, help="Rerun even if up to date.")
def main(stage, config_path, artifacts_dir, seed, text_path, force):
    """Run one pipeline stage against an artifact directory."""
    sys.exit(run_stage(stage, config_path, artifacts_dir, seed, text_path, force))


if __name__ == "__main__":
    main()
