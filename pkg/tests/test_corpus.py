import json

import pytest

from citegraph.corpus import (
    CorpusError,
    corpus_stats,
    drop_short_descriptions,
    filter_by_min_year,
    load_corpus,
    save_corpus,
)


def test_load_well_formed_jsonl(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    assert len(corp) == 3
    assert corp.ids() == ["a", "b", "c"]
    assert len(corp.provenance) == 1
    assert corp.provenance[0]["op"] == "load"


def test_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_corpus(tmp_path / "nope.jsonl")


def test_empty_description_rejected_with_row(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"id": "a", "year": 1990, "description": "ok text"}) + "\n"
                    + json.dumps({"id": "b", "year": 1990, "description": "   "}) + "\n")
    with pytest.raises(CorpusError, match="row 1.*description"):
        load_corpus(path)


def test_duplicate_id_is_hard_error(tmp_path):
    path = tmp_path / "dup.jsonl"
    row = json.dumps({"id": "a", "year": 1990, "description": "text here"})
    path.write_text(row + "\n" + row + "\n")
    with pytest.raises(CorpusError, match="duplicate id 'a'"):
        load_corpus(path)


def test_bad_year(tmp_path):
    path = tmp_path / "year.jsonl"
    path.write_text(json.dumps({"id": "a", "year": -3, "description": "text"}) + "\n")
    with pytest.raises(CorpusError, match="year"):
        load_corpus(path)


def test_csv_import_with_quoted_fields(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text('id,year,description\na,1990,"has, a comma"\nb,1991,"line\nbreak"\n')
    corp = load_corpus(path)
    assert len(corp) == 2
    assert corp.records[0].description == "has, a comma"
    assert corp.records[1].description == "line\nbreak"


def test_filter_by_min_year(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    out = filter_by_min_year(corp, 1990)
    assert [r.year for r in out.records] == [1990]
    assert out.provenance[-1] == {"op": "filter_by_min_year", "min_year": 1990, "removed": 2}


def test_filter_by_min_year_predicate(tmp_path):
    path = tmp_path / "y.jsonl"
    with path.open("w") as fh:
        for i, year in enumerate([1700, 1985, 2001]):
            fh.write(json.dumps({"id": str(i), "year": year, "description": "x y z"}) + "\n")
    out = filter_by_min_year(load_corpus(path), 1985)
    assert sorted(r.year for r in out.records) == [1985, 2001]


def test_filter_min_year_zero_is_identity(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    assert filter_by_min_year(corp, 0).records == corp.records


def test_filter_all_removed(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    out = filter_by_min_year(corp, 3000)
    assert len(out) == 0
    assert out.provenance[-1]["removed"] == 3


def test_drop_short_descriptions(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    out = drop_short_descriptions(corp, 50)
    assert len(out) == 0
    assert drop_short_descriptions(corp, 1).records == corp.records


def test_drop_short_keeps_at_threshold(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(json.dumps({"id": "a", "year": 1990, "description": "one two three"}) + "\n")
    corp = load_corpus(path)
    assert len(drop_short_descriptions(corp, 3)) == 1   # exactly at threshold: kept
    assert len(drop_short_descriptions(corp, 4)) == 0


def test_filters_idempotent_and_commute(planted_corpus):
    corp, _, _, _ = planted_corpus
    once = filter_by_min_year(corp, 1995)
    twice = filter_by_min_year(once, 1995)
    assert once.records == twice.records

    a = drop_short_descriptions(filter_by_min_year(corp, 1995), 10)
    b = filter_by_min_year(drop_short_descriptions(corp, 10), 1995)
    assert set(a.ids()) == set(b.ids())


def test_save_load_round_trip(tmp_path, tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    out = tmp_path / "rt.jsonl"
    save_corpus(corp, out)
    again = load_corpus(out)
    assert again.records == corp.records


def test_unknown_keys_pass_through(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text(json.dumps({"id": "a", "year": 1990, "description": "text x",
                                "docket": "99-123"}) + "\n")
    corp = load_corpus(path)
    assert corp.records[0].extra == {"docket": "99-123"}
    out = tmp_path / "e2.jsonl"
    save_corpus(corp, out)
    assert load_corpus(out).records[0].extra == {"docket": "99-123"}


def test_stats_empty(tmp_path, tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    empty = filter_by_min_year(corp, 3000)
    stats = corpus_stats(empty)
    assert stats["record_count"] == 0
    assert stats["per_year"] == {}


def test_stats_counts(tiny_corpus_path):
    corp = load_corpus(tiny_corpus_path)
    stats = corpus_stats(corp)
    assert stats["record_count"] == 3
    assert stats["per_year"] == {1986: 2, 1990: 1}
    assert stats["per_justice"] == {"brennan": 1, "harlan": 2}
    assert sum(stats["per_year"].values()) == stats["record_count"]
