"""Turn free-text model responses into mention lists, with diagnostics.

The requested answer format is a bracketed list of single-pair objects,
e.g. [{'中国': '地缘政治实体'}]. Models wrap it in prose, code fences, or
JSON-style double quotes; parse_response tolerates all of that and never
raises. Mentions whose surface is absent from the sentence are kept here
and only flagged later during error analysis.
"""

from __future__ import annotations

import ast
import re
import warnings
from dataclasses import dataclass, field

from .corpus import Mention

CLEAN = "clean"
RECOVERED_FROM_PROSE = "recovered_from_prose"
CODE_FENCE_STRIPPED = "code_fence_stripped"
MALFORMED_DROPPED = "malformed_dropped"
DUPLICATE_COLLAPSED = "duplicate_collapsed"

_FENCE_RE = re.compile(r"```[A-Za-z0-9_+-]*")


@dataclass
class ParseOutcome:
    mentions: list[Mention] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def _find_bracketed_spans(text: str) -> list[tuple[int, int]]:
    """Top-level balanced [...] spans, skipping brackets inside quotes."""
    spans: list[tuple[int, int]] = []
    depth = 0
    start = -1
    quote = ""
    escaped = False
    for i, ch in enumerate(text):
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = ""
            continue
        if depth > 0 and ch in "'\"":
            quote = ch
            continue
        if ch == "[":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "]" and depth > 0:
            depth -= 1
            if depth == 0:
                spans.append((start, i + 1))
    return spans


def _literal_list(fragment: str):
    # arbitrary model text can trip compile-time warnings (bad escapes);
    # neither they nor any parse error may escape this function
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            value = ast.literal_eval(fragment)
    except Exception:
        return None
    return value if isinstance(value, list) else None


def _pairs_from_item(item) -> list[tuple[str, str]] | None:
    """Valid mention pairs from one list item, or None if unusable."""
    if not isinstance(item, dict) or not item:
        return None
    pairs = []
    for k, v in item.items():
        if not isinstance(k, str) or not isinstance(v, str):
            return None
        surface, label = k.strip(), v.strip()
        if not surface:
            return None
        pairs.append((surface, label))
    return pairs


def _is_well_formed(value: list) -> bool:
    """The requested shape: every item a single-pair string dict."""
    for item in value:
        pairs = _pairs_from_item(item)
        if pairs is None or len(pairs) != 1:
            return False
    return True


def parse_response(text: str) -> ParseOutcome:
    """Extract the last well-formed answer list from a model response.

    Total over arbitrary strings: unusable input yields an empty mention
    list with a `malformed_dropped` diagnostic instead of an error.
    """
    outcome = ParseOutcome()
    if not isinstance(text, str):
        outcome.diagnostics.append(MALFORMED_DROPPED)
        return outcome

    stripped, n_fences = _FENCE_RE.subn("", text)
    if n_fences:
        outcome.diagnostics.append(CODE_FENCE_STRIPPED)

    candidates = []
    for lo, hi in _find_bracketed_spans(stripped):
        value = _literal_list(stripped[lo:hi])
        if value is not None:
            candidates.append(((lo, hi), value))

    chosen = None
    dropped_items = False
    for span, value in reversed(candidates):
        if _is_well_formed(value):
            chosen = (span, value)
            break
    if chosen is None and candidates:
        # Salvage the last parseable list: keep usable pairs, drop the rest.
        chosen = candidates[-1]
        dropped_items = True
    if chosen is None:
        outcome.diagnostics.append(MALFORMED_DROPPED)
        return outcome

    (lo, hi), value = chosen
    raw_pairs: list[tuple[str, str]] = []
    for item in value:
        pairs = _pairs_from_item(item)
        if pairs is None:
            dropped_items = True
            continue
        raw_pairs.extend(pairs)

    seen: set[tuple[str, str]] = set()
    for surface, label in raw_pairs:
        if (surface, label) in seen:
            if DUPLICATE_COLLAPSED not in outcome.diagnostics:
                outcome.diagnostics.append(DUPLICATE_COLLAPSED)
            continue
        seen.add((surface, label))
        outcome.mentions.append(Mention(surface=surface, label=label))

    if stripped.strip() != stripped[lo:hi]:
        outcome.diagnostics.append(RECOVERED_FROM_PROSE)
    if dropped_items:
        outcome.diagnostics.append(MALFORMED_DROPPED)
    if not outcome.diagnostics:
        outcome.diagnostics.append(CLEAN)
    return outcome


def _flatten_strings(value) -> list[str]:
    out: list[str] = []
    stack = [value]
    while stack:
        item = stack.pop(0)
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, (list, tuple)):
            stack = list(item) + stack
    return out


def extract_ordered_strings(text: str) -> list[str]:
    """Strings from the last bracketed list in the text, nested lists flattened."""
    last: list[str] = []
    for lo, hi in _find_bracketed_spans(text):
        value = _literal_list(text[lo:hi])
        if value is not None:
            flat = _flatten_strings(value)
            if flat:
                last = flat
    return last


def parse_label_sequence(text: str, expected: list[str]) -> list[str] | None:
    """Recover an ordered label list that covers `expected` exactly.

    Model responses usually restate the order as a (possibly nested) list,
    e.g. [['Person'], ['Organization']]. When no such list matches, falls
    back to ordering labels by first occurrence in the text, provided all
    of them appear.
    """
    want = set(expected)
    flat = [s.strip() for s in extract_ordered_strings(text)]
    ordered: list[str] = []
    for s in flat:
        if s in want and s not in ordered:
            ordered.append(s)
    if set(ordered) == want:
        return ordered

    positions = [(text.find(label), label) for label in expected]
    if all(pos >= 0 for pos, _ in positions):
        return [label for _, label in sorted(positions)]
    return None


def serialize_answer(mentions: list[Mention], language: str = "zh") -> str:
    """Canonical answer string; parse_response(serialize_answer(m)) == dedup(m).

    Both template packs request the same bracketed single-pair form, so the
    rendering does not vary by language.
    """
    del language
    parts = ["{%s: %s}" % (repr(m.surface), repr(m.label)) for m in mentions]
    return "[" + ", ".join(parts) + "]"
