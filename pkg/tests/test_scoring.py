import json
import random

import pytest

from zsner.corpus import Dataset, LabelOrder, Mention, Sentence
from zsner.errors import ShapeError
from zsner.scoring import (
    CATEGORIES,
    COMPLETELY_O,
    CONTAIN_GOLD,
    CONTAINED_BY_GOLD,
    OOD_MENTION,
    OOD_TYPE,
    OMITTED,
    OVERLAP_GOLD,
    WRONG_TYPE,
    Metrics,
    aggregate_report,
    classify_errors,
    render_error_table,
    score,
    summarize_metrics,
)


def M(surface, label):
    return Mention(surface, label)


def test_identity_scores_one():
    gold = {"s1": [M("a", "X")], "s2": [M("b", "Y"), M("c", "X")]}
    m = score(gold, gold)
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)


def test_hand_counted_two_sevenths():
    gold = {"s1": [M("A", "X"), M("B", "Y"), M("C", "X"), M("D", "Z")]}
    pred = {"s1": [M("A", "X"), M("B", "Z"), M("E", "X")]}
    m = score(pred, gold)
    assert m.tp == 1 and m.fp == 2 and m.fn == 3
    assert m.precision == pytest.approx(1 / 3, abs=1e-12)
    assert m.recall == pytest.approx(1 / 4, abs=1e-12)
    assert m.f1 == pytest.approx(2 / 7, abs=1e-9)


def test_empty_prediction_degenerate_zero():
    gold = {"s1": [M("a", "X")]}
    pred = {"s1": []}
    m = score(pred, gold)
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_both_empty_is_zero_not_error():
    m = score({"s1": []}, {"s1": []})
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_id_mismatch_is_shape_error():
    with pytest.raises(ShapeError):
        score({"s1": []}, {"s2": []})


def test_multiset_credit_capped():
    gold = {"s1": [M("京", "地名")]}
    pred = {"s1": [M("京", "地名"), M("京", "地名")]}
    m = score(pred, gold)
    assert m.tp == 1 and m.fp == 1 and m.fn == 0


def test_score_symmetry_swap():
    rng = random.Random(5)
    for _ in range(100):
        pred = {"s": [M(f"m{rng.randint(0,5)}", "X") for _ in range(rng.randint(0, 4))]}
        gold = {"s": [M(f"m{rng.randint(0,5)}", "X") for _ in range(rng.randint(0, 4))]}
        a = score(pred, gold)
        b = score(gold, pred)
        assert a.precision == b.recall and a.recall == b.precision


def test_f1_between_p_and_r():
    rng = random.Random(6)
    for _ in range(200):
        tp, fp, fn = rng.randint(0, 5), rng.randint(0, 5), rng.randint(0, 5)
        m = Metrics(tp=tp, fp=fp, fn=fn)
        if m.precision + m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


# -- error taxonomy ----------------------------------------------------------

ZH_SENT = Sentence(
    id="onto4-ex",
    text="中国保险监管项目在京启动",
    gold=(M("中国", "GPE"), M("京", "GPE")),
)
ZH_LABELS = LabelOrder(labels=("GPE", "ORG"))


def test_table12_sentence_fixture():
    pred = [M("中国保险", "GPE"), M("监管", "ORG"), M("北京", "GPE")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.counts[CONTAIN_GOLD] == 1
    assert report.counts[COMPLETELY_O] == 1
    assert report.counts[OOD_MENTION] == 1
    assert report.counts[OMITTED] == 1
    for cat in (OOD_TYPE, WRONG_TYPE, CONTAINED_BY_GOLD, OVERLAP_GOLD):
        assert report.counts[cat] == 0
    assert report.total == 4


def test_identity_has_no_errors():
    report = classify_errors(list(ZH_SENT.gold), list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.total == 0


def test_ood_type_rule():
    pred = [M("京", "动物")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.counts[OOD_TYPE] == 1
    # the gold 京 has no exact match and no boundary shield, so it is omitted
    assert report.counts[OMITTED] == 2  # 中国 also unmatched


def test_wrong_type_rule():
    pred = [M("京", "ORG"), M("中国", "GPE")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.counts[WRONG_TYPE] == 1


def test_contained_by_gold_rule():
    sent = Sentence(id="s", text="中国保险监管项目在京启动", gold=(M("中国保险", "ORG"),))
    pred = [M("保险", "ORG")]
    report = classify_errors(pred, list(sent.gold), sent, ZH_LABELS)
    assert report.counts[CONTAINED_BY_GOLD] == 1
    # the containing gold is shielded from the omitted count
    assert report.counts[OMITTED] == 0


def test_overlap_rule():
    sent = Sentence(id="s", text="中国保险监管项目", gold=(M("中国保", "ORG"),))
    pred = [M("保险监", "ORG")]
    report = classify_errors(pred, list(sent.gold), sent, ZH_LABELS)
    assert report.counts[OVERLAP_GOLD] == 1
    assert report.counts[OMITTED] == 0


def test_priority_ood_mention_before_type():
    # surface absent from text wins over a label outside the set
    pred = [M("火星", "动物")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.counts[OOD_MENTION] == 1
    assert report.counts[OOD_TYPE] == 0


def test_excess_duplicate_is_completely_o():
    pred = [M("京", "GPE"), M("京", "GPE"), M("中国", "GPE")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    assert report.counts[COMPLETELY_O] == 1
    assert report.total == 1


_SYLLABLES = ["中国", "保险", "监管", "项目", "在", "京", "启动", "北", "海", "南"]


def _random_case(rng):
    text = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 6)))
    labels = LabelOrder(labels=("A", "B"))

    def rand_mention(in_text_bias):
        if rng.random() < in_text_bias and len(text) >= 2:
            i = rng.randrange(len(text) - 1)
            j = rng.randrange(i + 1, min(len(text), i + 5) + 1)
            surface = text[i:j]
        else:
            surface = rng.choice(["火星", "月球", "外星"])
        label = rng.choice(["A", "B", "C"])
        return M(surface, label)

    gold = [rand_mention(1.0) for _ in range(rng.randint(0, 3))]
    gold = [M(g.surface, rng.choice(["A", "B"])) for g in gold]
    pred = [rand_mention(0.8) for _ in range(rng.randint(0, 4))]
    sent = Sentence(id="s", text=text, gold=tuple(gold))
    return sent, gold, pred, labels


def test_partition_property_random_fixtures():
    rng = random.Random(99)
    prediction_side = [c for c in CATEGORIES if c != OMITTED]
    for _ in range(1000):
        sent, gold, pred, labels = _random_case(rng)
        report = classify_errors(pred, gold, sent, labels)
        matched = score({"s": pred}, {"s": gold}).tp
        erroneous = len(pred) - matched
        assert sum(report.counts[c] for c in prediction_side) == erroneous
        assert report.counts[OMITTED] <= len(gold) - matched
        assert report.total == sum(report.counts.values())


def test_aggregate_report_files(tmp_path):
    dataset = Dataset(
        name="toy",
        language="zh",
        sentences=(ZH_SENT,),
        label_order=ZH_LABELS,
    )
    pred = {"onto4-ex": [M("中国", "GPE")]}
    result = aggregate_report(pred, dataset, tmp_path)
    assert (tmp_path / "metrics.json").exists()
    assert (tmp_path / "errors.jsonl").exists()
    assert (tmp_path / "report.md").exists()
    saved = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert saved["metrics"]["tp"] == 1
    assert saved["errors"]["counts"][OMITTED] == 1
    md = (tmp_path / "report.md").read_text(encoding="utf-8")
    assert "| Omitted mentions | 1 |" in md


def test_render_error_table_rows():
    pred = [M("中国保险", "GPE"), M("北京", "GPE")]
    report = classify_errors(pred, list(ZH_SENT.gold), ZH_SENT, ZH_LABELS)
    table = render_error_table(report)
    assert "| Boundary / Contain gold. | 1 |" in table
    assert "| OOD mentions | 1 |" in table
    assert table.splitlines()[-1].startswith("| Total |")


def test_zero_errors_percentages_zero():
    dataset = Dataset(name="toy", language="zh", sentences=(ZH_SENT,), label_order=ZH_LABELS)
    result = aggregate_report({"onto4-ex": list(ZH_SENT.gold)}, dataset)
    assert result["errors"]["total"] == 0
    assert all(v == 0.0 for v in result["errors"]["percentages"].values())


def test_summarize_metrics_mean_std():
    runs = [Metrics(1, 1, 1), Metrics(2, 0, 0), Metrics(1, 0, 1)]
    out = summarize_metrics(runs)
    f1s = [m.f1 for m in runs]
    assert out["f1"]["mean"] == pytest.approx(sum(f1s) / 3)
    assert out["f1"]["std"] >= 0
