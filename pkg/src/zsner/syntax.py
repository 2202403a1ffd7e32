"""Syntactic annotations: sidecar ingestion, validation, and prompt rendering.

Annotations are precomputed by an external parser and shipped as JSONL
sidecar files; this module only validates and renders them. Five kinds are
supported: word segmentation (Chinese only), noun phrases (hints only,
never rendered as tool content), POS tags, constituency trees, and
dependency trees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import requests

from .corpus import Sentence
from .errors import AssemblyError, ContractError, LoadError, TransportError


class SyntaxKind(str, Enum):
    SEGMENTATION = "segmentation"
    NOUN_PHRASES = "noun_phrases"
    POS = "pos"
    CONSTITUENCY = "constituency"
    DEPENDENCY = "dependency"


#: Kinds that may be injected as parser-produced prompt blocks.
TOOL_KINDS = (
    SyntaxKind.SEGMENTATION,
    SyntaxKind.POS,
    SyntaxKind.CONSTITUENCY,
    SyntaxKind.DEPENDENCY,
)


def kinds_for_language(language: str) -> tuple[SyntaxKind, ...]:
    if language == "zh":
        return tuple(SyntaxKind)
    return tuple(k for k in SyntaxKind if k is not SyntaxKind.SEGMENTATION)


@dataclass(frozen=True)
class Tree:
    """Constituency node: a label with ordered children; leaves are tokens."""

    label: str
    children: tuple = ()  # Tree or str entries

    def leaves(self) -> list[str]:
        out: list[str] = []
        for c in self.children:
            if isinstance(c, Tree):
                out.extend(c.leaves())
            else:
                out.append(c)
        return out

    def flat(self) -> str:
        parts = [c.flat() if isinstance(c, Tree) else c for c in self.children]
        return "(" + " ".join([self.label] + parts) + ")"


def parse_tree(text: str) -> Tree:
    """Parse a parenthesized constituency tree string."""
    tokens: list[str] = []
    cur = ""
    for ch in text:
        if ch in "()":
            if cur:
                tokens.append(cur)
                cur = ""
            tokens.append(ch)
        elif ch.isspace():
            if cur:
                tokens.append(cur)
                cur = ""
        else:
            cur += ch
    if cur:
        tokens.append(cur)

    pos = 0

    def parse_node() -> Tree:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != "(":
            raise LoadError("constituency tree: expected '('")
        pos += 1
        if pos >= len(tokens) or tokens[pos] in "()":
            raise LoadError("constituency tree: missing node label")
        label = tokens[pos]
        pos += 1
        children: list = []
        while pos < len(tokens) and tokens[pos] != ")":
            if tokens[pos] == "(":
                children.append(parse_node())
            else:
                children.append(tokens[pos])
                pos += 1
        if pos >= len(tokens):
            raise LoadError("constituency tree: unbalanced parentheses")
        pos += 1  # consume ')'
        return Tree(label=label, children=tuple(children))

    root = parse_node()
    if pos != len(tokens):
        raise LoadError("constituency tree: trailing content after root")
    return root


def format_tree(tree: Tree, margin: int = 70, indent: int = 0) -> str:
    """Pretty-print a tree, wrapping subtrees that exceed the margin.

    A subtree that fits within the margin stays on one line; otherwise its
    children each start on a new line indented two spaces deeper.
    """
    flat = tree.flat()
    if len(flat) + indent < margin:
        return flat
    lines = "(" + tree.label
    for child in tree.children:
        pad = " " * (indent + 2)
        if isinstance(child, Tree):
            lines += "\n" + pad + format_tree(child, margin, indent + 2)
        else:
            lines += "\n" + pad + child
    return lines + ")"


@dataclass(frozen=True)
class SyntacticAnnotation:
    sentence_id: str
    segmentation: tuple[str, ...] | None = None
    pos: tuple[tuple[str, str], ...] | None = None
    noun_phrases: tuple[str, ...] | None = None
    constituency: Tree | None = None
    dependency: tuple[tuple[str, str, str], ...] | None = None

    def __post_init__(self):
        if self.pos is not None and self.segmentation is not None:
            pos_tokens = [t for t, _ in self.pos]
            if pos_tokens != list(self.segmentation):
                raise LoadError(
                    f"annotation {self.sentence_id!r}: POS tokens disagree with segmentation"
                )
        if self.dependency is not None:
            roots = [t for t in self.dependency if t[2] == "root"]
            if len(roots) != 1:
                raise LoadError(
                    f"annotation {self.sentence_id!r}: expected exactly one 'root' relation, "
                    f"found {len(roots)}"
                )

    def has(self, kind: SyntaxKind) -> bool:
        return getattr(self, kind.value) is not None

    def validate_against(self, sentence: Sentence) -> None:
        """Cross-checks that need the sentence text."""
        nospace = "".join(sentence.text.split())
        if self.constituency is not None:
            leaves = "".join("".join(l.split()) for l in self.constituency.leaves())
            if leaves != nospace:
                raise LoadError(
                    f"annotation {self.sentence_id!r}: constituency leaves do not "
                    f"reconstruct the sentence text"
                )
        if self.dependency is not None:
            for dep, head, rel in self.dependency:
                for tok in (dep, head):
                    if tok not in sentence.text:
                        raise LoadError(
                            f"annotation {self.sentence_id!r}: dependency token {tok!r} "
                            f"not present in sentence"
                        )

    def as_record(self) -> dict:
        rec: dict = {"sentence_id": self.sentence_id}
        if self.segmentation is not None:
            rec["segmentation"] = list(self.segmentation)
        if self.pos is not None:
            rec["pos"] = [list(p) for p in self.pos]
        if self.noun_phrases is not None:
            rec["noun_phrases"] = list(self.noun_phrases)
        if self.constituency is not None:
            rec["constituency"] = format_tree(self.constituency)
        if self.dependency is not None:
            rec["dependency"] = [list(t) for t in self.dependency]
        return rec


def annotation_from_record(rec: dict) -> SyntacticAnnotation:
    if not isinstance(rec, dict) or "sentence_id" not in rec:
        raise LoadError("annotation record missing 'sentence_id'")
    sid = str(rec["sentence_id"])
    try:
        seg = tuple(str(t) for t in rec["segmentation"]) if "segmentation" in rec else None
        pos = (
            tuple((str(t), str(g)) for t, g in rec["pos"]) if "pos" in rec else None
        )
        nps = tuple(str(t) for t in rec["noun_phrases"]) if "noun_phrases" in rec else None
        tree = parse_tree(rec["constituency"]) if "constituency" in rec else None
        dep = (
            tuple((str(d), str(h), str(r)) for d, h, r in rec["dependency"])
            if "dependency" in rec
            else None
        )
    except LoadError as e:
        raise LoadError(f"annotation {sid!r}: {e}") from e
    except (TypeError, ValueError) as e:
        raise LoadError(f"annotation {sid!r}: malformed field ({e})") from e
    return SyntacticAnnotation(
        sentence_id=sid,
        segmentation=seg,
        pos=pos,
        noun_phrases=nps,
        constituency=tree,
        dependency=dep,
    )


def load_annotations(
    path: str,
    sentences: dict[str, Sentence] | None = None,
) -> dict[str, SyntacticAnnotation]:
    """Load a sidecar JSONL file into a sentence_id -> annotation map.

    When `sentences` is given, each annotation is cross-checked against its
    sentence text; ids absent from the dataset are skipped and reported
    once as a warning (not fatal).
    """
    out: dict[str, SyntacticAnnotation] = {}
    unknown: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise LoadError(f"{path} line {lineno}: invalid JSON ({e.msg})") from e
            ann = annotation_from_record(rec)
            if sentences is not None:
                sent = sentences.get(ann.sentence_id)
                if sent is None:
                    unknown.append(ann.sentence_id)
                    continue
                ann.validate_against(sent)
            out[ann.sentence_id] = ann
    if unknown:
        import warnings

        warnings.warn(f"{path}: {len(unknown)} annotation ids not in dataset: {unknown[:10]}")
    return out


def write_annotations(annotations: dict[str, SyntacticAnnotation], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ann in annotations.values():
            f.write(json.dumps(ann.as_record(), ensure_ascii=False) + "\n")


def render_list(items) -> str:
    """Bracketed, single-quoted list rendering shared by prompts and blocks."""
    return "[" + ", ".join(repr(list(i)) if isinstance(i, (list, tuple)) else repr(i) for i in items) + "]"


# Headers for tool blocks, per language. Kept in sync with the template packs.
_HEADERS = {
    "zh": {
        SyntaxKind.SEGMENTATION: "分词：",
        SyntaxKind.POS: "词性标注：",
        SyntaxKind.CONSTITUENCY: "成分树：",
        SyntaxKind.DEPENDENCY: "依存树：",
    },
    "en": {
        SyntaxKind.POS: "Part-of-Speech tags: ",
        SyntaxKind.CONSTITUENCY: "Constituency tree: ",
        SyntaxKind.DEPENDENCY: "Dependency tree: ",
    },
}


def render_syntax(ann: SyntacticAnnotation, kind: SyntaxKind, language: str) -> str:
    """Render one annotation kind as the exact prompt block (with header).

    Noun phrases are never rendered: no reliable parser produces them, so
    they exist only as reasoning-hint subjects.
    """
    kind = SyntaxKind(kind)
    if kind is SyntaxKind.NOUN_PHRASES:
        raise AssemblyError("noun phrases cannot be rendered as tool content")
    headers = _HEADERS.get(language)
    if headers is None or kind not in headers:
        raise AssemblyError(f"syntax kind {kind.value!r} is not available for language {language!r}")
    if not ann.has(kind):
        raise AssemblyError(
            f"annotation {ann.sentence_id!r} has no {kind.value!r} field"
        )
    header = headers[kind]
    if kind is SyntaxKind.SEGMENTATION:
        body = render_list(ann.segmentation)
    elif kind is SyntaxKind.POS:
        body = " ".join(f"{tok}/{tag}" for tok, tag in ann.pos)
    elif kind is SyntaxKind.CONSTITUENCY:
        body = format_tree(ann.constituency)
    else:
        body = render_list(ann.dependency)
    return header + body + "\n"


def fetch_annotations(
    endpoint: str,
    sentences: list[Sentence],
    kinds: list[SyntaxKind],
    language: str,
    out_path: str,
    *,
    batch_size: int = 32,
    timeout_s: float = 60.0,
    session: requests.Session | None = None,
) -> dict[str, SyntacticAnnotation]:
    """Fetch annotations from an exporter service and write the sidecar file.

    Wire contract: POST `endpoint` with
    {"texts": [{"id", "text", "language"}], "kinds": [...]} and receive
    {"annotations": [sidecar records]}. Idempotent: existing records in
    `out_path` are kept and only missing sentences are requested.
    """
    kinds = [SyntaxKind(k) for k in kinds]
    existing: dict[str, SyntacticAnnotation] = {}
    try:
        existing = load_annotations(out_path)
    except FileNotFoundError:
        pass

    def covered(sid: str) -> bool:
        ann = existing.get(sid)
        return ann is not None and all(ann.has(k) for k in kinds)

    pending = [s for s in sentences if not covered(s.id)]
    http = session or requests
    for i in range(0, len(pending), batch_size):
        batch = pending[i : i + batch_size]
        payload = {
            "texts": [{"id": s.id, "text": s.text, "language": language} for s in batch],
            "kinds": [k.value for k in kinds],
        }
        try:
            resp = http.post(endpoint, json=payload, timeout=timeout_s)
        except requests.RequestException as e:
            raise TransportError(f"annotation endpoint unreachable: {e}") from e
        if resp.status_code != 200:
            raise ContractError(f"annotation endpoint returned {resp.status_code}: {resp.text[:300]}")
        body = resp.json()
        records = body.get("annotations")
        if not isinstance(records, list):
            raise ContractError("annotation response missing 'annotations' list")
        for rec in records:
            if not isinstance(rec, dict) or "sentence_id" not in rec:
                raise ContractError("annotation response record missing field 'sentence_id'")
            ann = annotation_from_record(rec)
            existing[ann.sentence_id] = ann

    ordered: dict[str, SyntacticAnnotation] = {}
    known = {s.id for s in sentences}
    for s in sentences:
        if s.id in existing:
            ordered[s.id] = existing[s.id]
    # keep any previously fetched records for other sentences
    for sid, ann in existing.items():
        if sid not in known:
            ordered[sid] = ann
    write_annotations(ordered, out_path)
    return ordered
