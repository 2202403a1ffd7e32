"""Datasets, gold mentions, label orders, and seeded subset sampling.

Datasets are JSONL (one sentence per line) or CoNLL BIO files. Gold
annotations are stored string-level as (surface, label) pairs; duplicate
pairs within a sentence are kept as a multiset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import IntegrityError, LoadError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Mention:
    """One (surface string, entity label) pair."""

    surface: str
    label: str

    def as_dict(self) -> dict:
        return {"text": self.surface, "label": self.label}


@dataclass(frozen=True)
class Sentence:
    id: str
    text: str
    gold: tuple[Mention, ...] = ()


@dataclass(frozen=True)
class LabelOrder:
    """Question order for decomposed QA.

    `display_labels`, when given, is the order used to print the label set
    in prompts; it must cover the same labels. Defaults to `labels`.
    """

    labels: tuple[str, ...]
    provenance: str = "manual"  # manual | model-proposed
    display_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.labels:
            raise LoadError("label order is empty")
        if len(set(self.labels)) != len(self.labels):
            dupes = sorted({l for l in self.labels if list(self.labels).count(l) > 1})
            raise LoadError(f"duplicate labels in order: {dupes}")
        if self.display_labels is not None and set(self.display_labels) != set(self.labels):
            raise LoadError("display labels do not cover the same label set as the order")

    @property
    def display(self) -> tuple[str, ...]:
        return self.display_labels if self.display_labels is not None else self.labels


@dataclass(frozen=True)
class Dataset:
    name: str
    language: str  # zh | en
    sentences: tuple[Sentence, ...]
    label_order: LabelOrder

    def __post_init__(self):
        if self.language not in ("zh", "en"):
            raise LoadError(f"unsupported language: {self.language!r}")
        if not self.sentences:
            raise LoadError(f"dataset {self.name!r} has no sentences")
        seen: set[str] = set()
        for s in self.sentences:
            if s.id in seen:
                raise IntegrityError(f"duplicate sentence id {s.id!r} in dataset {self.name!r}")
            seen.add(s.id)

    def by_id(self) -> dict[str, Sentence]:
        return {s.id: s for s in self.sentences}


def _mention_from_obj(obj: dict, sentence_id: str, lineno: int) -> Mention:
    if not isinstance(obj, dict) or "text" not in obj or "label" not in obj:
        raise LoadError(f"line {lineno}: entity record for {sentence_id!r} needs 'text' and 'label'")
    surface = str(obj["text"]).strip()
    if not surface:
        raise LoadError(f"line {lineno}: empty entity surface in {sentence_id!r}")
    return Mention(surface=surface, label=str(obj["label"]).strip())


def load_dataset(
    path: str,
    format: str = "jsonl",
    *,
    name: str | None = None,
    language: str = "zh",
    label_order: LabelOrder | None = None,
) -> Dataset:
    """Load a dataset file and enforce all invariants.

    When `label_order` is omitted, one is derived from the gold labels in
    first-appearance order (fine for tests; real runs pass an explicit order).
    """
    if format == "jsonl":
        sentences = _load_jsonl(path)
    elif format == "conll":
        sentences = _load_conll(path, language)
    else:
        raise LoadError(f"unknown dataset format {format!r}")

    for s in sentences:
        for m in s.gold:
            if m.surface not in s.text:
                raise IntegrityError(
                    f"sentence {s.id!r}: gold mention {m.surface!r} is not a substring of the text"
                )

    if label_order is None:
        seen: list[str] = []
        for s in sentences:
            for m in s.gold:
                if m.label not in seen:
                    seen.append(m.label)
        label_order = LabelOrder(labels=tuple(seen) or ("entity",))
    else:
        known = set(label_order.labels)
        for s in sentences:
            for m in s.gold:
                if m.label not in known:
                    raise IntegrityError(
                        f"sentence {s.id!r}: gold label {m.label!r} missing from label order"
                    )

    return Dataset(
        name=name or path,
        language=language,
        sentences=tuple(sentences),
        label_order=label_order,
    )


def _load_jsonl(path: str) -> list[Sentence]:
    sentences: list[Sentence] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise LoadError(f"line {lineno}: invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise LoadError(f"line {lineno}: record needs 'id' and 'text' fields")
            sid = str(obj["id"])
            gold = tuple(
                _mention_from_obj(e, sid, lineno) for e in obj.get("entities", [])
            )
            sentences.append(Sentence(id=sid, text=str(obj["text"]), gold=gold))
    if not sentences:
        raise LoadError(f"{path}: no sentences found")
    return sentences


def _load_conll(path: str, language: str) -> list[Sentence]:
    """Read token/tag columns with blank-line sentence breaks.

    BIO tags are converted to surface mentions by joining the token span
    (space-joined for en, directly for zh). An I- tag without a matching
    open span starts a new mention, as conlleval does.
    """
    joiner = " " if language == "en" else ""
    sentences: list[Sentence] = []
    tokens: list[str] = []
    tags: list[str] = []
    start_line = 1

    def flush(lineno: int):
        nonlocal tokens, tags
        if tokens:
            text = joiner.join(tokens)
            gold = _bio_to_mentions(tokens, tags, joiner, lineno)
            sentences.append(Sentence(id=f"s{len(sentences) + 1}", text=text, gold=gold))
        tokens, tags = [], []

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(start_line)
                start_line = lineno + 1
                continue
            cols = line.split("\t") if "\t" in line else line.split()
            if len(cols) < 2:
                raise LoadError(f"line {lineno}: expected token and tag columns")
            tokens.append(cols[0])
            tags.append(cols[-1])
    flush(start_line)
    if not sentences:
        raise LoadError(f"{path}: no sentences found")
    return sentences


def _bio_to_mentions(tokens: list[str], tags: list[str], joiner: str, lineno: int) -> tuple[Mention, ...]:
    mentions: list[Mention] = []
    span: list[str] = []
    span_label = ""

    def close():
        nonlocal span, span_label
        if span:
            mentions.append(Mention(surface=joiner.join(span), label=span_label))
        span, span_label = [], ""

    for tok, tag in zip(tokens, tags):
        if tag == "O":
            close()
            continue
        if "-" not in tag:
            raise LoadError(f"near line {lineno}: malformed BIO tag {tag!r}")
        prefix, label = tag.split("-", 1)
        if prefix == "B" or (prefix == "I" and (not span or span_label != label)):
            close()
            span, span_label = [tok], label
        elif prefix == "I":
            span.append(tok)
        else:
            raise LoadError(f"near line {lineno}: malformed BIO tag {tag!r}")
    close()
    return tuple(mentions)


def write_dataset(dataset: Dataset, path: str) -> None:
    """Write the JSONL form; load_dataset(write_dataset(d)) round-trips."""
    with open(path, "w", encoding="utf-8") as f:
        for s in dataset.sentences:
            obj = {"id": s.id, "text": s.text, "entities": [m.as_dict() for m in s.gold]}
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_label_order(path: str, *, display_path: str | None = None) -> LabelOrder:
    """Read a label-order file: one label per line, UTF-8.

    Lines starting with '#' are comments; a '# provenance: model-proposed'
    comment marks orders produced by the `order` command.
    """
    labels, provenance = _read_label_lines(path)
    display = None
    if display_path is not None:
        display, _ = _read_label_lines(display_path)
    return LabelOrder(labels=tuple(labels), provenance=provenance, display_labels=display)


def _read_label_lines(path: str) -> tuple[list[str], str]:
    labels: list[str] = []
    provenance = "manual"
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "model-proposed" in line:
                    provenance = "model-proposed"
                continue
            labels.append(line)
    if not labels:
        raise LoadError(f"{path}: no labels found")
    return labels, provenance


def write_label_order(order: LabelOrder, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if order.provenance == "model-proposed":
            f.write("# provenance: model-proposed\n")
        for label in order.labels:
            f.write(label + "\n")


class SplitMix64:
    """Tiny seedable 64-bit generator (splitmix64), used for subset draws.

    The algorithm is fixed and documented in the README so that subsets
    reproduce bit-for-bit in any implementation.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def sample_subset(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Draw n sentences without replacement, reproducibly.

    Fisher-Yates shuffle driven by splitmix64(seed), then take the first n
    in shuffle order. Identical (dataset, n, seed) always yields the same
    subset.
    """
    total = len(dataset.sentences)
    if n <= 0:
        raise ValueError(f"subset size must be positive, got {n}")
    if n > total:
        raise ValueError(f"subset size {n} exceeds dataset size {total}")
    rng = SplitMix64(seed)
    order = list(range(total))
    for i in range(total - 1, 0, -1):
        j = rng.next() % (i + 1)
        order[i], order[j] = order[j], order[i]
    chosen = tuple(dataset.sentences[i] for i in order[:n])
    return replace(dataset, sentences=chosen)
