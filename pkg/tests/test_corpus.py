import json

import pytest

from zsner.corpus import (
    LabelOrder,
    Mention,
    SplitMix64,
    load_dataset,
    load_label_order,
    sample_subset,
    write_dataset,
    write_label_order,
)
from zsner.errors import IntegrityError, LoadError


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def make_dataset(tmp_path, n=10):
    records = [
        {"id": f"s{i}", "text": f"sentence {i} about 京", "entities": [{"text": "京", "label": "地名"}]}
        for i in range(n)
    ]
    path = tmp_path / "data.jsonl"
    write_jsonl(path, records)
    return load_dataset(str(path), "jsonl", language="zh")


def test_load_jsonl_table12_sentence(tmp_path):
    path = tmp_path / "onto.jsonl"
    write_jsonl(path, [
        {
            "id": "s1",
            "text": "中国保险监管项目在京启动",
            "entities": [
                {"text": "中国", "label": "地缘政治实体"},
                {"text": "京", "label": "地缘政治实体"},
            ],
        }
    ])
    ds = load_dataset(str(path), "jsonl", language="zh")
    assert len(ds.sentences) == 1
    assert ds.sentences[0].gold == (
        Mention("中国", "地缘政治实体"),
        Mention("京", "地缘政治实体"),
    )


def test_load_jsonl_empty_entities(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, [{"id": "s1", "text": "没有实体", "entities": []}])
    ds = load_dataset(str(path), language="zh")
    assert ds.sentences[0].gold == ()


def test_load_jsonl_malformed_line_reports_lineno(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "s1", "text": "ok", "entities": []}\nnot json\n', encoding="utf-8")
    with pytest.raises(LoadError, match="line 2"):
        load_dataset(str(path))


def test_gold_mention_must_be_substring(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, [{"id": "s1", "text": "中国保险", "entities": [{"text": "北京", "label": "地名"}]}])
    with pytest.raises(IntegrityError, match="北京"):
        load_dataset(str(path))


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, [
        {"id": "s1", "text": "a", "entities": []},
        {"id": "s1", "text": "b", "entities": []},
    ])
    with pytest.raises(IntegrityError, match="duplicate"):
        load_dataset(str(path))


def test_duplicate_gold_pairs_kept_as_multiset(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, [{
        "id": "s1", "text": "京在京", "entities": [
            {"text": "京", "label": "地名"},
            {"text": "京", "label": "地名"},
        ],
    }])
    ds = load_dataset(str(path))
    assert len(ds.sentences[0].gold) == 2


def test_conll_bio_conversion(tmp_path):
    # Tony B-PER / Blair I-PER / runs O -> one mention "Tony Blair"
    path = tmp_path / "d.conll"
    path.write_text("Tony B-PER\nBlair I-PER\nruns O\n\n", encoding="utf-8")
    ds = load_dataset(str(path), "conll", language="en")
    assert ds.sentences[0].text == "Tony Blair runs"
    assert ds.sentences[0].gold == (Mention("Tony Blair", "PER"),)


def test_conll_orphan_i_tag_starts_new_span(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text("Paris I-LOC\nis O\n\n", encoding="utf-8")
    ds = load_dataset(str(path), "conll", language="en")
    assert ds.sentences[0].gold == (Mention("Paris", "LOC"),)


def test_conll_tab_separated_and_multiple_sentences(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text("北\tB-LOC\n京\tI-LOC\n\n他\tO\n\n", encoding="utf-8")
    ds = load_dataset(str(path), "conll", language="zh")
    assert [s.text for s in ds.sentences] == ["北京", "他"]
    assert ds.sentences[0].gold == (Mention("北京", "LOC"),)


def test_round_trip(tmp_path):
    ds = make_dataset(tmp_path, 5)
    out = tmp_path / "round.jsonl"
    write_dataset(ds, str(out))
    again = load_dataset(str(out), language="zh")
    assert again.sentences == ds.sentences


def test_sample_subset_full_draw_is_same_set(tmp_path):
    ds = make_dataset(tmp_path, 10)
    sub = sample_subset(ds, 10, seed=3)
    assert {s.id for s in sub.sentences} == {s.id for s in ds.sentences}


def test_sample_subset_deterministic(tmp_path):
    ds = make_dataset(tmp_path, 10)
    a = sample_subset(ds, 3, seed=1)
    b = sample_subset(ds, 3, seed=1)
    assert [s.id for s in a.sentences] == [s.id for s in b.sentences]


def test_sample_subset_matches_reference_shuffle(tmp_path):
    # independent re-implementation of splitmix64 + Fisher-Yates
    MASK = (1 << 64) - 1

    def reference_draw(n_total, n, seed):
        state = seed & MASK

        def nxt():
            nonlocal state
            state = (state + 0x9E3779B97F4A7C15) & MASK
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
            return z ^ (z >> 31)

        order = list(range(n_total))
        for i in range(n_total - 1, 0, -1):
            j = nxt() % (i + 1)
            order[i], order[j] = order[j], order[i]
        return order[:n]

    ds = make_dataset(tmp_path, 50)
    sub = sample_subset(ds, 7, seed=42)
    expected = [ds.sentences[i].id for i in reference_draw(50, 7, 42)]
    assert [s.id for s in sub.sentences] == expected


def test_sample_subset_seeds_differ_with_overlap(tmp_path):
    ds = make_dataset(tmp_path, 40)
    a = [s.id for s in sample_subset(ds, 30, seed=1).sentences]
    b = [s.id for s in sample_subset(ds, 30, seed=2).sentences]
    assert a != b
    # drawn from the same pool, so the overlap is large but not total
    overlap = set(a) & set(b)
    assert len(overlap) >= 20


def test_sample_subset_rejects_oversize(tmp_path):
    ds = make_dataset(tmp_path, 4)
    with pytest.raises(ValueError):
        sample_subset(ds, 5, seed=0)


def test_splitmix64_known_values():
    # first outputs for seed 0, from the published splitmix64 reference
    rng = SplitMix64(0)
    assert rng.next() == 0xE220A8397B1DCDAF
    assert rng.next() == 0x6E789E6AA1B965F4


def test_label_order_file(tmp_path):
    path = tmp_path / "order.txt"
    path.write_text(
        "Person\nOrganization\nLocation\nFacility\nWeapon\nVehicle\nGeo-Political Entity\n",
        encoding="utf-8",
    )
    order = load_label_order(str(path))
    assert len(order.labels) == 7
    assert order.labels[0] == "Person"
    assert order.provenance == "manual"


def test_label_order_single_label(tmp_path):
    path = tmp_path / "order.txt"
    path.write_text("人名\n", encoding="utf-8")
    assert load_label_order(str(path)).labels == ("人名",)


def test_label_order_duplicate_rejected(tmp_path):
    path = tmp_path / "order.txt"
    path.write_text("人名\n人名\n", encoding="utf-8")
    with pytest.raises(LoadError, match="duplicate"):
        load_label_order(str(path))


def test_label_order_empty_rejected(tmp_path):
    path = tmp_path / "order.txt"
    path.write_text("", encoding="utf-8")
    with pytest.raises(LoadError):
        load_label_order(str(path))


def test_label_order_provenance_round_trip(tmp_path):
    order = LabelOrder(labels=("a", "b"), provenance="model-proposed")
    path = tmp_path / "o.txt"
    write_label_order(order, str(path))
    again = load_label_order(str(path))
    assert again.provenance == "model-proposed"
    assert again.labels == ("a", "b")


def test_display_labels_must_cover_order():
    with pytest.raises(LoadError):
        LabelOrder(labels=("a", "b"), display_labels=("a",))


def test_gold_label_outside_order_rejected(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, [{"id": "s1", "text": "京", "entities": [{"text": "京", "label": "地名"}]}])
    with pytest.raises(IntegrityError, match="地名"):
        load_dataset(str(path), label_order=LabelOrder(labels=("人名",)))
