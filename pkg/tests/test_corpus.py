import json

import pytest
from hypothesis import given, settings, strategies as st

from rareval.corpus import (AMAZON_2014, GENERIC_CSV, Dataset, IngestionError,
                            UnknownIdError, export_csv, ingest)
from tests.conftest import make_dataset


def write_amazon(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def amazon_record(user="u1", item="i1", rating=4, text="nice", ts=1000):
    return {"reviewerID": user, "asin": item, "overall": rating,
            "reviewText": text, "unixReviewTime": ts}


def test_ingest_empty_file(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 0 and ds.n_users == 0 and ds.n_items == 0
    assert report.kept == 0


def test_ingest_three_records(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [
        amazon_record("u1", "i1", 5, "great"),
        amazon_record("u2", "i1", 3, "meh"),
        amazon_record("u1", "i2", 4, "good"),
    ])
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 3 and ds.n_users == 2 and ds.n_items == 2
    assert report.kept == 3


def test_empty_text_dropped(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [amazon_record(text="fine"), amazon_record(user="u2", text="")])
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 1
    assert report.dropped_empty_text == 1


def test_whitespace_only_text_counts_as_empty(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [amazon_record(text="  \t\n ")])
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 0 and report.dropped_empty_text == 1


def test_rating_out_of_range_rejected(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [amazon_record(rating=7), amazon_record(user="u2", rating=0)])
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 0 and report.rejected_bad_rating == 2


def test_malformed_record_collected_not_fatal(tmp_path):
    p = tmp_path / "d.json"
    with open(p, "w") as fh:
        fh.write(json.dumps(amazon_record()) + "\n")
        fh.write("{not json\n")
    ds, report = ingest(p, AMAZON_2014)
    assert len(ds) == 1 and report.malformed == 1
    with pytest.raises(IngestionError):
        ingest(p, AMAZON_2014, strict=True)


def test_missing_file():
    with pytest.raises(IngestionError):
        ingest("/nonexistent/file.json", AMAZON_2014)


def test_duplicate_pairs_kept(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [amazon_record(text="first"), amazon_record(text="second")])
    ds, _ = ingest(p, AMAZON_2014)
    assert len(ds) == 2 and ds.n_users == 1 and ds.n_items == 1


def test_user_history_order_and_partition(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [
        amazon_record("u1", "i1", 5, "a"),
        amazon_record("u2", "i1", 3, "b"),
        amazon_record("u1", "i2", 4, "c"),
    ])
    ds, _ = ingest(p, AMAZON_2014)
    u1 = ds.user_id_of["u1"]
    hist = ds.user_history(u1)
    assert [r.text for r in hist] == ["a", "c"]  # source order
    assert sum(len(ds.user_history(u)) for u in ds.user_index) == 3
    assert sum(len(ds.item_history(i)) for i in ds.item_index) == 3
    with pytest.raises(UnknownIdError):
        ds.user_history(999)


def test_ingest_deterministic(tmp_path):
    p = tmp_path / "d.json"
    write_amazon(p, [amazon_record(f"u{k % 5}", f"i{k % 3}", 1 + k % 5, f"text {k}")
                     for k in range(30)])
    a, _ = ingest(p, AMAZON_2014)
    b, _ = ingest(p, AMAZON_2014)
    assert a == b
    assert a.user_ids == b.user_ids and a.item_ids == b.item_ids


def test_csv_round_trip(tmp_path):
    ds = make_dataset(50, 8, 6, seed=3)
    out = tmp_path / "export.csv"
    export_csv(ds, out)
    back, report = ingest(out, GENERIC_CSV)
    assert report.kept == 50
    assert back == ds


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=200), st.integers(min_value=0, max_value=10_000))
def test_index_partition_property(n, seed):
    ds = make_dataset(n, max(1, n // 3 + 1), max(1, n // 4 + 1), seed=seed)
    seen = set()
    for positions in ds.user_index.values():
        assert positions == sorted(positions)
        seen.update(positions)
    assert seen == set(range(n))
    seen_i = set()
    for positions in ds.item_index.values():
        seen_i.update(positions)
    assert seen_i == set(range(n))
    assert sum(map(len, ds.user_index.values())) == n == sum(map(len, ds.item_index.values()))
