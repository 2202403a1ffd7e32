"""Prompt assembly: vanilla messages, decomposed-QA turns, hints, and shots.

All assembly is pure and byte-deterministic. Messages are plain
{"role", "content"} dicts in the order they are sent.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import LabelOrder, Mention, Sentence
from .errors import AssemblyError
from .parsing import serialize_answer
from .syntax import TOOL_KINDS, SyntacticAnnotation, SyntaxKind, render_list, render_syntax
from .templates import TemplatePack

FRONT = "front"
BACK = "back"
SELF = "self"
TOOL = "tool"


@dataclass(frozen=True)
class Hint:
    """A syntactic reasoning hint: what to analyze, where it sits, who parses."""

    kind: SyntaxKind
    position: str  # front | back
    source: str = SELF  # self | tool

    def __post_init__(self):
        object.__setattr__(self, "kind", SyntaxKind(self.kind))
        if self.position not in (FRONT, BACK):
            raise AssemblyError(f"hint position must be front or back, got {self.position!r}")
        if self.source not in (SELF, TOOL):
            raise AssemblyError(f"hint source must be self or tool, got {self.source!r}")


@dataclass(frozen=True)
class Demonstration:
    """A few-shot example: text, optional annotation, gold answer."""

    text: str
    answer: tuple[Mention, ...]
    annotation: SyntacticAnnotation | None = None


@dataclass(frozen=True)
class PromptPlan:
    mode: str = "vanilla"  # vanilla | decomposed
    hint: Hint | None = None
    tool_kinds: tuple[SyntaxKind, ...] = ()
    shots: tuple[Demonstration, ...] = ()

    def __post_init__(self):
        if self.mode not in ("vanilla", "decomposed"):
            raise AssemblyError(f"unknown prompt mode {self.mode!r}")
        kinds = tuple(SyntaxKind(k) for k in self.tool_kinds)
        object.__setattr__(self, "tool_kinds", kinds)
        if SyntaxKind.NOUN_PHRASES in kinds:
            raise AssemblyError("noun phrases are not available for tool augmentation")
        if self.hint is not None and self.hint.source == TOOL:
            if self.hint.kind not in kinds:
                raise AssemblyError(
                    f"tool-sourced hint kind {self.hint.kind.value!r} requires that kind "
                    f"in tool_kinds"
                )


def render_hint(kind: SyntaxKind, position: str, source: str, pack: TemplatePack) -> str:
    """Exact hint string from the pack for (kind, position, source)."""
    hint = Hint(kind=kind, position=position, source=source)
    slot = f"hint_{hint.position}" + ("_tool" if hint.source == TOOL else "")
    return pack.get(slot, hint.kind)


def _hint_for(plan: PromptPlan, position: str, pack: TemplatePack) -> str:
    if plan.hint is None or plan.hint.position != position:
        return ""
    return render_hint(plan.hint.kind, plan.hint.position, plan.hint.source, pack)


def _label_set(labels: LabelOrder) -> str:
    return render_list(labels.display)


def _tool_blocks(
    plan: PromptPlan,
    ann: SyntacticAnnotation | None,
    pack: TemplatePack,
    owner: str,
) -> str:
    if not plan.tool_kinds:
        return ""
    if ann is None:
        raise AssemblyError(f"{owner}: annotation required for tool kinds "
                            f"{[k.value for k in plan.tool_kinds]}")
    blocks = []
    for kind in TOOL_KINDS:
        if kind in plan.tool_kinds:
            blocks.append(render_syntax(ann, kind, pack.language))
    return "".join(blocks)


def _instruction(plan: PromptPlan, pack: TemplatePack) -> str:
    # The per-kind tool instruction exists for a single kind; multi-kind
    # augmentation falls back to the generic instruction.
    if len(plan.tool_kinds) == 1:
        return pack.get("task_instruction_tool", plan.tool_kinds[0])
    return pack.get("task_instruction")


def _demo_kinds(plan: PromptPlan) -> tuple[SyntaxKind, ...]:
    if plan.tool_kinds:
        return plan.tool_kinds
    if plan.hint is not None and plan.hint.kind is not SyntaxKind.NOUN_PHRASES:
        return (plan.hint.kind,)
    return ()


def render_demonstrations(shots: tuple[Demonstration, ...], plan: PromptPlan, pack: TemplatePack) -> str:
    """Concatenated demonstration blocks placed before the test sample."""
    if not shots:
        return ""
    kinds = _demo_kinds(plan)
    out = []
    for i, shot in enumerate(shots):
        blocks = ""
        if kinds:
            if shot.annotation is None:
                raise AssemblyError(f"demonstration {i}: missing syntactic annotation for "
                                    f"{[k.value for k in kinds]}")
            for kind in TOOL_KINDS:
                if kind in kinds:
                    blocks += render_syntax(shot.annotation, kind, pack.language)
        answer = serialize_answer(list(shot.answer), pack.language)
        out.append(pack.render("demonstration", text=shot.text, tool_blocks=blocks, answer=answer))
    return "".join(out)


def build_preamble(
    sentence: Sentence,
    labels: LabelOrder,
    plan: PromptPlan,
    pack: TemplatePack,
    ann: SyntacticAnnotation | None = None,
) -> str:
    """Shared opening block: label set, instruction, hints, shots, text, tools."""
    if not labels.labels:
        raise AssemblyError("empty label order")
    hint_front = _hint_for(plan, FRONT, pack)
    return pack.render(
        "preamble",
        label_set=_label_set(labels),
        instruction=_instruction(plan, pack),
        hint_front=pack.join_hint("", hint_front),
        demonstrations=render_demonstrations(plan.shots, plan, pack),
        text=sentence.text,
        tool_blocks=_tool_blocks(plan, ann, pack, f"sentence {sentence.id!r}"),
    )


def _question(label: str | None, plan: PromptPlan, pack: TemplatePack) -> str:
    answer_format = pack.render("answer_format")
    if label is None:
        q = pack.render("question_vanilla", answer_format=answer_format)
    else:
        q = pack.render("question", label=label, answer_format=answer_format)
    return pack.join_hint(q, _hint_for(plan, BACK, pack))


def build_vanilla_messages(
    sentence: Sentence,
    labels: LabelOrder,
    plan: PromptPlan,
    pack: TemplatePack,
    ann: SyntacticAnnotation | None = None,
) -> list[dict]:
    """One user message asking for entities of all labels at once."""
    if plan.mode != "vanilla":
        raise AssemblyError(f"vanilla assembly requires mode=vanilla, got {plan.mode!r}")
    content = build_preamble(sentence, labels, plan, pack, ann) + _question(None, plan, pack)
    return [{"role": "user", "content": content}]


def build_decomposed_turn(
    sentence: Sentence,
    label: str,
    history: list[tuple[str, str]],
    plan: PromptPlan,
    pack: TemplatePack,
    ann: SyntacticAnnotation | None = None,
    *,
    labels: LabelOrder,
) -> list[dict]:
    """Messages for one turn: preamble, prior Q/A pairs, current question.

    `history` holds (question, answer) pairs from earlier turns; answers are
    raw model outputs, or voted serializations under question-level SC.
    """
    if plan.mode != "decomposed":
        raise AssemblyError(f"decomposed assembly requires mode=decomposed, got {plan.mode!r}")
    if label not in labels.labels:
        raise ValueError(f"label {label!r} not in label order {list(labels.labels)}")
    messages = [{"role": "user", "content": build_preamble(sentence, labels, plan, pack, ann)}]
    for question, answer in history:
        messages.append({"role": "user", "content": question})
        messages.append({"role": "assistant", "content": answer})
    messages.append({"role": "user", "content": _question(label, plan, pack)})
    return messages


def build_order_elicitation(labels: list[str], pack: TemplatePack) -> list[dict]:
    """One message asking the model for a reasonable label order."""
    if not labels:
        raise AssemblyError("cannot elicit an order for an empty label set")
    content = pack.render("order_elicitation", label_set=render_list(labels))
    return [{"role": "user", "content": content}]
