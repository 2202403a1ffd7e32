"""Span-level micro P/R/F1 and the eight-category error taxonomy.

Matching is string-level on exact (surface, label) pairs, multiset-capped:
predicting the same mention twice against a single gold occurrence yields
one TP and one FP. Erroneous predictions fall into exactly one category,
decided by a fixed priority order; gold mentions with no exact match and
no containment/overlap prediction count as omitted.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Dataset, LabelOrder, Mention, Sentence
from .errors import ShapeError

OOD_TYPE = "ood_type"
WRONG_TYPE = "wrong_type"
CONTAIN_GOLD = "contain_gold"
CONTAINED_BY_GOLD = "contained_by_gold"
OVERLAP_GOLD = "overlap_gold"
COMPLETELY_O = "completely_o"
OMITTED = "omitted"
OOD_MENTION = "ood_mention"

CATEGORIES = (
    OOD_TYPE,
    WRONG_TYPE,
    CONTAIN_GOLD,
    CONTAINED_BY_GOLD,
    OVERLAP_GOLD,
    COMPLETELY_O,
    OMITTED,
    OOD_MENTION,
)

# Display rows in the order the error table reports them.
CATEGORY_ROWS = (
    ("Type", "OOD types", OOD_TYPE),
    ("Type", "Wrong types", WRONG_TYPE),
    ("Boundary", "Contain gold.", CONTAIN_GOLD),
    ("Boundary", "Contained by gold.", CONTAINED_BY_GOLD),
    ("Boundary", "Overlap with gold.", OVERLAP_GOLD),
    ("", "Completely-O", COMPLETELY_O),
    ("", "Omitted mentions", OMITTED),
    ("", "OOD mentions", OOD_MENTION),
)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _match_counts(pred: list[Mention], gold: list[Mention]) -> int:
    pc = Counter((m.surface, m.label) for m in pred)
    gc = Counter((m.surface, m.label) for m in gold)
    return sum(min(c, gc[pair]) for pair, c in pc.items())


def score(pred: dict[str, list[Mention]], gold: dict[str, list[Mention]]) -> Metrics:
    """Micro-aggregated exact-match metrics over sentences keyed by id."""
    if set(pred) != set(gold):
        missing = sorted(set(gold) - set(pred))[:5]
        extra = sorted(set(pred) - set(gold))[:5]
        raise ShapeError(f"prediction/gold id mismatch (missing {missing}, extra {extra})")
    tp = fp = fn = 0
    for sid in gold:
        matched = _match_counts(pred[sid], gold[sid])
        tp += matched
        fp += len(pred[sid]) - matched
        fn += len(gold[sid]) - matched
    return Metrics(tp=tp, fp=fp, fn=fn)


@dataclass
class ErrorReport:
    counts: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CATEGORIES})
    items: list[dict] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[str, float]:
        total = self.total
        return {c: (self.counts[c] / total if total else 0.0) for c in CATEGORIES}

    def merge(self, other: "ErrorReport") -> None:
        for c in CATEGORIES:
            self.counts[c] += other.counts[c]
        self.items.extend(other.items)

    def as_dict(self) -> dict:
        return {"counts": dict(self.counts), "total": self.total,
                "percentages": self.percentages()}


def _first_span(text: str, surface: str) -> tuple[int, int] | None:
    i = text.find(surface)
    if i == -1:
        return None
    return (i, i + len(surface))


def _span_contains(outer: tuple[int, int], inner: tuple[int, int]) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _classify_mention(
    m: Mention,
    sentence: Sentence,
    label_set: set[str],
    gold: list[Mention],
) -> tuple[str, list[Mention]]:
    """Apply the priority rules to one erroneous prediction.

    Returns (category, related gold mentions). Related golds are only
    reported for the boundary rules; they shield those golds from the
    omitted count.
    """
    if m.surface not in sentence.text:
        return OOD_MENTION, []
    if m.label not in label_set:
        return OOD_TYPE, []
    same_surface = [g for g in gold if g.surface == m.surface and g.label != m.label]
    if same_surface:
        return WRONG_TYPE, []
    contained = [g for g in gold if g.surface != m.surface and g.surface in m.surface]
    if contained:
        return CONTAIN_GOLD, contained
    containing = [g for g in gold if g.surface != m.surface and m.surface in g.surface]
    if containing:
        return CONTAINED_BY_GOLD, containing
    pspan = _first_span(sentence.text, m.surface)
    overlapping = []
    for g in gold:
        gspan = _first_span(sentence.text, g.surface)
        if gspan is None:
            continue
        if pspan[0] < gspan[1] and gspan[0] < pspan[1]:
            if not _span_contains(pspan, gspan) and not _span_contains(gspan, pspan):
                overlapping.append(g)
    if overlapping:
        return OVERLAP_GOLD, overlapping
    return COMPLETELY_O, []


def classify_errors(
    pred: list[Mention],
    gold: list[Mention],
    sentence: Sentence,
    labels: LabelOrder,
) -> ErrorReport:
    """Classify one sentence's errors into the eight-category taxonomy."""
    report = ErrorReport()
    label_set = set(labels.labels)

    gc = Counter((g.surface, g.label) for g in gold)
    pc = Counter((p.surface, p.label) for p in pred)
    matched = {pair: min(c, gc[pair]) for pair, c in pc.items() if pair in gc}

    shielded: set[tuple[str, str]] = set()
    excess: list[Mention] = []
    seen: Counter = Counter()
    for m in pred:
        pair = (m.surface, m.label)
        seen[pair] += 1
        if seen[pair] > matched.get(pair, 0):
            excess.append(m)

    for m in excess:
        category, related = _classify_mention(m, sentence, label_set, gold)
        report.counts[category] += 1
        report.items.append(
            {
                "sentence_id": sentence.id,
                "category": category,
                "mention": m.as_dict(),
                "related_gold": [g.as_dict() for g in related],
            }
        )
        shielded.update((g.surface, g.label) for g in related)

    gold_seen: Counter = Counter()
    for g in gold:
        pair = (g.surface, g.label)
        gold_seen[pair] += 1
        if gold_seen[pair] <= matched.get(pair, 0):
            continue
        if pair in shielded:
            continue
        report.counts[OMITTED] += 1
        report.items.append(
            {
                "sentence_id": sentence.id,
                "category": OMITTED,
                "mention": g.as_dict(),
                "related_gold": [],
            }
        )
    return report


def classify_errors_run(
    pred: dict[str, list[Mention]],
    dataset: Dataset,
) -> ErrorReport:
    if set(pred) != {s.id for s in dataset.sentences}:
        raise ShapeError("prediction ids do not match dataset ids")
    report = ErrorReport()
    for sentence in dataset.sentences:
        report.merge(
            classify_errors(pred[sentence.id], list(sentence.gold), sentence, dataset.label_order)
        )
    return report


def summarize_metrics(runs: list[Metrics]) -> dict:
    """Mean and standard deviation across repeated runs (e.g. three seeds)."""
    if not runs:
        raise ValueError("no metrics to summarize")
    out = {}
    for name in ("precision", "recall", "f1"):
        values = [getattr(m, name) for m in runs]
        out[name] = {
            "mean": statistics.fmean(values),
            "std": statistics.pstdev(values) if len(values) > 1 else 0.0,
            "values": values,
        }
    return out


def render_error_table(report: ErrorReport) -> str:
    """Human-readable table mirroring the error-taxonomy row structure."""
    pct = report.percentages()
    lines = ["| Error type | Count | Percent |", "|---|---:|---:|"]
    for group, title, key in CATEGORY_ROWS:
        name = f"{group} / {title}" if group else title
        lines.append(f"| {name} | {report.counts[key]} | {pct[key] * 100:.1f}% |")
    lines.append(f"| Total | {report.total} | 100.0% |" if report.total
                 else "| Total | 0 | 0.0% |")
    return "\n".join(lines)


def aggregate_report(
    pred: dict[str, list[Mention]],
    dataset: Dataset,
    out_dir: str | Path | None = None,
) -> dict:
    """Metrics plus error tables; optionally writes the report files."""
    gold = {s.id: list(s.gold) for s in dataset.sentences}
    metrics = score(pred, gold)
    errors = classify_errors_run(pred, dataset)
    result = {
        "dataset": dataset.name,
        "n_sentences": len(dataset.sentences),
        "metrics": metrics.as_dict(),
        "errors": errors.as_dict(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(
            json.dumps(result, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        with open(out / "errors.jsonl", "w", encoding="utf-8") as f:
            for item in errors.items:
                f.write(json.dumps(item, ensure_ascii=False) + "\n")
        table = render_error_table(errors)
        md = (
            f"# Evaluation report: {dataset.name}\n\n"
            f"Sentences: {len(dataset.sentences)}\n\n"
            f"Precision: {metrics.precision:.4f}  \n"
            f"Recall: {metrics.recall:.4f}  \n"
            f"F1: {metrics.f1:.4f}\n\n"
            f"## Error types\n\n{table}\n"
        )
        (out / "report.md").write_text(md, encoding="utf-8")
    return result
