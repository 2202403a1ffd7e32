"""Template packs: externalized prompt strings keyed by (slot, kind, position).

A pack is a directory of UTF-8 text files. File names encode the slot
(`question.txt`, `hint_front.pos.txt`, ...); placeholder syntax is `{name}`
with `{{` escaping literal braces. Built-in `zh` and `en` packs ship with
the package; custom packs are directories with a `language.txt` marker.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import PackError
from .syntax import TOOL_KINDS, SyntaxKind

# Placeholders each slot may reference. Anything else is a load error.
_ALLOWED_PLACEHOLDERS = {
    "preamble": {"label_set", "instruction", "hint_front", "demonstrations", "text", "tool_blocks"},
    "question": {"label", "answer_format"},
    "question_vanilla": {"answer_format"},
    "answer_format": set(),
    "order_elicitation": {"label_set"},
    "demonstration": {"text", "tool_blocks", "answer"},
}

_HINT_SLOTS = ("hint_front", "hint_back", "hint_front_tool", "hint_back_tool")

_REQUIRED_PLAIN = (
    "preamble",
    "task_instruction",
    "question",
    "question_vanilla",
    "answer_format",
    "order_elicitation",
    "demonstration",
)


def _self_kinds(language: str) -> tuple[SyntaxKind, ...]:
    kinds = tuple(SyntaxKind)
    if language == "en":
        kinds = tuple(k for k in kinds if k is not SyntaxKind.SEGMENTATION)
    return kinds


def _tool_kinds(language: str) -> tuple[SyntaxKind, ...]:
    if language == "en":
        return tuple(k for k in TOOL_KINDS if k is not SyntaxKind.SEGMENTATION)
    return TOOL_KINDS


@dataclass(frozen=True)
class TemplatePack:
    language: str
    slots: dict  # flat "slot" or "slot.kind" -> template string
    source: str = ""

    def __post_init__(self):
        if self.language not in ("zh", "en"):
            raise PackError(f"pack language must be zh or en, got {self.language!r}")
        self._validate()

    def _validate(self) -> None:
        missing = [s for s in _REQUIRED_PLAIN if s not in self.slots]
        for kind in _tool_kinds(self.language):
            for slot in ("task_instruction_tool", "hint_front_tool", "hint_back_tool", "syntax_header"):
                key = f"{slot}.{kind.value}"
                if key not in self.slots:
                    missing.append(key)
        for kind in _self_kinds(self.language):
            for slot in ("hint_front", "hint_back"):
                key = f"{slot}.{kind.value}"
                if key not in self.slots:
                    missing.append(key)
        if missing:
            raise PackError(f"pack {self.source or self.language!r} missing entries: {sorted(missing)}")
        if self.language == "en":
            seg = [k for k in self.slots if k.endswith(".segmentation")]
            if seg:
                raise PackError(f"en pack must not contain segmentation entries: {seg}")
        for key, template in self.slots.items():
            slot = key.split(".", 1)[0]
            allowed = _ALLOWED_PLACEHOLDERS.get(slot, set())
            for _, field, _, _ in string.Formatter().parse(template):
                if field is not None and field not in allowed:
                    raise PackError(f"pack entry {key!r} references unknown placeholder {{{field}}}")

    # -- lookups ---------------------------------------------------------

    def get(self, slot: str, kind: SyntaxKind | None = None) -> str:
        key = f"{slot}.{kind.value}" if kind is not None else slot
        try:
            return self.slots[key]
        except KeyError:
            raise PackError(f"pack {self.source or self.language!r} has no entry {key!r}") from None

    def render(self, slot: str, kind: SyntaxKind | None = None, **values: str) -> str:
        template = self.get(slot, kind)
        try:
            return template.format(**values)
        except (KeyError, IndexError) as e:
            raise PackError(f"pack entry {slot!r}: unresolved placeholder ({e})") from e

    def syntax_headers(self) -> dict[SyntaxKind, str]:
        return {k: self.slots[f"syntax_header.{k.value}"] for k in _tool_kinds(self.language)}

    def join_hint(self, base: str, hint: str) -> str:
        """Append a reasoning hint using the language's spacing convention."""
        if not hint:
            return base
        sep = " " if self.language == "en" else ""
        return base + sep + hint


def _read_pack_dir(files) -> dict[str, str]:
    slots: dict[str, str] = {}
    for entry in files.iterdir():
        if not entry.name.endswith(".txt") or entry.name == "language.txt":
            continue
        key = entry.name[: -len(".txt")]
        text = entry.read_text(encoding="utf-8")
        if text.endswith("\n"):
            text = text[:-1]
        slots[key] = text
    return slots


def load_pack(name_or_path: str) -> TemplatePack:
    """Load a built-in pack by name ('zh', 'en') or a pack directory by path."""
    if name_or_path in ("zh", "en"):
        base = resources.files("zsner").joinpath("packs", name_or_path)
        return TemplatePack(language=name_or_path, slots=_read_pack_dir(base), source=name_or_path)
    path = Path(name_or_path)
    if not path.is_dir():
        raise PackError(f"template pack not found: {name_or_path}")
    lang_file = path / "language.txt"
    if not lang_file.exists():
        raise PackError(f"pack {name_or_path}: missing language.txt")
    language = lang_file.read_text(encoding="utf-8").strip()
    return TemplatePack(language=language, slots=_read_pack_dir(path), source=str(path))
