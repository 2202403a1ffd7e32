"""Golden-file checks for every published prompt combination, plus
structural properties of decomposed-turn assembly."""

import pytest

from zsner.corpus import LabelOrder, Mention
from zsner.errors import AssemblyError, LoadError, PackError
from zsner.prompts import (
    Demonstration,
    Hint,
    PromptPlan,
    build_decomposed_turn,
    build_order_elicitation,
    build_vanilla_messages,
    render_demonstrations,
    render_hint,
)
from zsner.syntax import SyntaxKind
from zsner.templates import load_pack

from conftest import fixture_text


def plan_for(case: str) -> PromptPlan:
    mode = "decomposed"
    hint = None
    tool = ()
    if "front_self" in case:
        kind = case.split("front_self_")[1].split("_")[0]
        if kind == "noun":
            kind = "noun_phrases"
        hint = Hint(kind=SyntaxKind(kind), position="front", source="self")
    elif "back_self" in case:
        kind = case.split("back_self_")[1].split("_")[0]
        if kind == "noun":
            kind = "noun_phrases"
        hint = Hint(kind=SyntaxKind(kind), position="back", source="self")
    elif "tool" in case:
        kind = case.split("tool_")[1].split("_")[0]
        if kind == "seg":
            kind = "segmentation"
        tool = (SyntaxKind(kind),)
        if "front" in case:
            hint = Hint(kind=SyntaxKind(kind), position="front", source="tool")
        elif "back" in case:
            hint = Hint(kind=SyntaxKind(kind), position="back", source="tool")
    return PromptPlan(mode=mode, hint=hint, tool_kinds=tool)


ZH_PREAMBLE_CASES = [
    "zh_plain_preamble",
    "zh_front_self_pos_preamble",
    "zh_front_self_segmentation_preamble",
    "zh_front_self_constituency_preamble",
    "zh_front_self_noun_phrases_preamble",
    "zh_tool_segmentation_preamble",
    "zh_tool_pos_preamble",
    "zh_tool_constituency_preamble",
    "zh_tool_dependency_preamble",
    "zh_tool_pos_front_preamble",
    "zh_tool_seg_front_preamble",
]

EN_PREAMBLE_CASES = [
    "en_plain_preamble",
    "en_front_self_noun_phrases_preamble",
    "en_front_self_pos_preamble",
    "en_front_self_dependency_preamble",
    "en_tool_pos_preamble",
    "en_tool_constituency_preamble",
    "en_tool_dependency_preamble",
    "en_tool_pos_front_preamble",
]

ZH_QUESTION_CASES = {
    "zh_plain_q1": ("人名", None),
    "zh_plain_q2": ("地名", None),
    "zh_plain_q3": ("机构名称", None),
    "zh_plain_q4": ("地缘政治实体", None),
    "zh_back_self_pos_q1": ("人名", None),
    "zh_back_self_noun_phrases_q1": ("人名", None),
    "zh_back_self_dependency_q1": ("人名", None),
    "zh_tool_dependency_back_q1": ("人名", None),
    "zh_tool_constituency_back_q1": ("人名", None),
}

EN_QUESTION_CASES = {
    "en_plain_q1": "Person",
    "en_plain_q2": "Organization",
    "en_plain_q3": "Location",
    "en_back_self_constituency_q1": "Person",
    "en_back_self_pos_q1": "Person",
    "en_tool_dependency_back_q1": "Person",
}


@pytest.mark.parametrize("case", ZH_PREAMBLE_CASES)
def test_zh_preambles_byte_identical(case, zh_sentence, zh_order, zh_ann, zh_pack):
    plan = plan_for(case)
    msgs = build_decomposed_turn(zh_sentence, "人名", [], plan, zh_pack, zh_ann, labels=zh_order)
    assert msgs[0]["content"] == fixture_text(case)


@pytest.mark.parametrize("case", EN_PREAMBLE_CASES)
def test_en_preambles_byte_identical(case, en_sentence, en_order, en_ann, en_pack):
    plan = plan_for(case)
    msgs = build_decomposed_turn(en_sentence, "Person", [], plan, en_pack, en_ann, labels=en_order)
    assert msgs[0]["content"] == fixture_text(case)


@pytest.mark.parametrize("case", sorted(ZH_QUESTION_CASES))
def test_zh_questions_byte_identical(case, zh_sentence, zh_order, zh_ann, zh_pack):
    label, _ = ZH_QUESTION_CASES[case]
    plan = plan_for(case)
    msgs = build_decomposed_turn(zh_sentence, label, [], plan, zh_pack, zh_ann, labels=zh_order)
    assert msgs[-1]["content"] == fixture_text(case)


@pytest.mark.parametrize("case", sorted(EN_QUESTION_CASES))
def test_en_questions_byte_identical(case, en_sentence, en_order, en_ann, en_pack):
    label = EN_QUESTION_CASES[case]
    plan = plan_for(case)
    msgs = build_decomposed_turn(en_sentence, label, [], plan, en_pack, en_ann, labels=en_order)
    assert msgs[-1]["content"] == fixture_text(case)


def test_order_elicitation_zh(zh_pack):
    labels = ["系统名称", "系统标识", "设备名称", "设备标识", "部件名称", "地点", "人员"]
    msgs = build_order_elicitation(labels, zh_pack)
    assert len(msgs) == 1
    assert msgs[0]["content"] == fixture_text("zh_order_elicitation")


def test_order_elicitation_en(en_order, en_pack):
    msgs = build_order_elicitation(list(en_order.labels), en_pack)
    assert msgs[0]["content"] == fixture_text("en_order_elicitation")
    assert "What is the reasonable label order?" in msgs[0]["content"]


def test_order_elicitation_single_label(en_pack):
    msgs = build_order_elicitation(["Person"], en_pack)
    assert "['Person']" in msgs[0]["content"]


# -- hints -------------------------------------------------------------------

def test_render_hint_front_self_noun_phrases_en(en_pack):
    assert render_hint(SyntaxKind.NOUN_PHRASES, "front", "self", en_pack) == (
        "First, you should recognize the noun phrases. Then, you should recognize "
        "named entities based on the noun phrases."
    )


def test_render_hint_back_self_pos_zh(zh_pack):
    assert render_hint(SyntaxKind.POS, "back", "self", zh_pack) == (
        "首先，让我们进行词性标注。接着，我们基于标注的词性识别命名实体。"
    )


def test_render_hint_back_tool_dependency_en(en_pack):
    assert render_hint(SyntaxKind.DEPENDENCY, "back", "tool", en_pack) == (
        "Let's infer named entities step by step from the text based on the given "
        "dependency tree."
    )


def test_render_hint_missing_entry_is_pack_error(en_pack):
    with pytest.raises(PackError):
        render_hint(SyntaxKind.SEGMENTATION, "front", "self", en_pack)


# -- structure ---------------------------------------------------------------

def test_vanilla_is_single_user_message(zh_sentence, zh_order, zh_pack):
    plan = PromptPlan(mode="vanilla")
    msgs = build_vanilla_messages(zh_sentence, zh_order, plan, zh_pack)
    assert len(msgs) == 1
    assert msgs[0]["role"] == "user"
    content = msgs[0]["content"]
    assert content.startswith("给定实体标签集：['地缘政治实体', '机构名称', '地名', '人名']")
    assert "文本：中国保险监管项目在京启动" in content
    assert content.endswith("答案：")


def test_vanilla_with_tool_block(zh_sentence, zh_order, zh_ann, zh_pack):
    plan = PromptPlan(mode="vanilla", tool_kinds=(SyntaxKind.POS,))
    content = build_vanilla_messages(zh_sentence, zh_order, plan, zh_pack, zh_ann)[0]["content"]
    assert "词性标注：中国/NR 保险/NN 监管/NN 项目/NN 在/P 京/NR 启动/VV" in content


def test_vanilla_missing_annotation_errors(zh_sentence, zh_order, zh_pack):
    plan = PromptPlan(mode="vanilla", tool_kinds=(SyntaxKind.POS,))
    with pytest.raises(AssemblyError):
        build_vanilla_messages(zh_sentence, zh_order, plan, zh_pack, None)


def test_empty_label_order_impossible():
    with pytest.raises(LoadError):
        LabelOrder(labels=())


def test_turn_message_arithmetic(zh_sentence, zh_order, zh_pack):
    # turn 3: preamble(1) + 2 history pairs (4) + current question (1)
    plan = PromptPlan(mode="decomposed")
    history = [("q1", "a1"), ("q2", "a2")]
    msgs = build_decomposed_turn(zh_sentence, "机构名称", history, plan, zh_pack, labels=zh_order)
    assert len(msgs) == 1 + 2 * 2 + 1
    roles = [m["role"] for m in msgs]
    assert roles == ["user", "user", "assistant", "user", "assistant", "user"]


def test_history_prefix_property(zh_sentence, zh_order, zh_pack):
    plan = PromptPlan(mode="decomposed")
    history = []
    previous = None
    for label in zh_order.labels:
        msgs = build_decomposed_turn(zh_sentence, label, history, plan, zh_pack, labels=zh_order)
        if previous is not None:
            assert msgs[: len(previous)] == previous
            assert len(msgs) == len(previous) + 2
        previous = msgs
        history.append((msgs[-1]["content"], f"answer-{label}"))


def test_history_answers_inserted_verbatim(zh_sentence, zh_order, zh_pack):
    plan = PromptPlan(mode="decomposed")
    history = [("q1", "raw model text [] with junk")]
    msgs = build_decomposed_turn(zh_sentence, "地名", history, plan, zh_pack, labels=zh_order)
    assert msgs[2]["content"] == "raw model text [] with junk"


def test_unknown_label_rejected(zh_sentence, zh_order, zh_pack):
    plan = PromptPlan(mode="decomposed")
    with pytest.raises(ValueError, match="not in label order"):
        build_decomposed_turn(zh_sentence, "动物", [], plan, zh_pack, labels=zh_order)


def test_assembly_deterministic(en_sentence, en_order, en_ann, en_pack):
    plan = plan_for("en_tool_pos_front_preamble")
    a = build_decomposed_turn(en_sentence, "Person", [], plan, en_pack, en_ann, labels=en_order)
    b = build_decomposed_turn(en_sentence, "Person", [], plan, en_pack, en_ann, labels=en_order)
    assert a == b


def test_plan_rejects_noun_phrase_tool():
    with pytest.raises(AssemblyError):
        PromptPlan(mode="decomposed", tool_kinds=(SyntaxKind.NOUN_PHRASES,))


def test_plan_tool_hint_requires_tool_kind():
    with pytest.raises(AssemblyError):
        PromptPlan(
            mode="decomposed",
            hint=Hint(kind=SyntaxKind.POS, position="front", source="tool"),
            tool_kinds=(),
        )


# -- demonstrations ----------------------------------------------------------

def test_zero_shots_render_empty(zh_pack):
    assert render_demonstrations((), PromptPlan(mode="vanilla"), zh_pack) == ""


def test_three_shots_with_segmentation(zh_pack, zh_ann):
    shot = Demonstration(
        text="中国保险监管项目在京启动",
        answer=(Mention("中国", "地缘政治实体"), Mention("京", "地缘政治实体")),
        annotation=zh_ann,
    )
    plan = PromptPlan(mode="vanilla", shots=(shot,) * 3,
                      tool_kinds=(SyntaxKind.SEGMENTATION,))
    block = render_demonstrations(plan.shots, plan, zh_pack)
    assert block.count("分词：") == 3
    assert block.count("答案：[{'中国': '地缘政治实体'}, {'京': '地缘政治实体'}]") == 3


def test_shot_missing_annotation_errors(zh_pack):
    shot = Demonstration(text="北京欢迎你", answer=(Mention("北京", "地名"),))
    plan = PromptPlan(mode="vanilla", shots=(shot,), tool_kinds=(SyntaxKind.POS,))
    with pytest.raises(AssemblyError, match="demonstration 0"):
        render_demonstrations(plan.shots, plan, zh_pack)


def test_shots_placed_before_test_text(zh_sentence, zh_order, zh_pack):
    shot = Demonstration(text="示例文本京", answer=(Mention("京", "地名"),))
    plan = PromptPlan(mode="vanilla", shots=(shot,))
    content = build_vanilla_messages(zh_sentence, zh_order, plan, zh_pack)[0]["content"]
    assert content.index("示例文本京") < content.index("中国保险监管项目在京启动")


# -- pack validation ---------------------------------------------------------

def test_builtin_packs_load():
    zh = load_pack("zh")
    en = load_pack("en")
    assert zh.language == "zh"
    assert en.language == "en"
    assert "task_instruction_tool.segmentation" in zh.slots
    assert all(not k.endswith(".segmentation") for k in en.slots)


def test_pack_header_matches_renderer_defaults(zh_pack, en_pack):
    from zsner.syntax import _HEADERS

    for kind, header in zh_pack.syntax_headers().items():
        assert _HEADERS["zh"][kind] == header
    for kind, header in en_pack.syntax_headers().items():
        assert _HEADERS["en"][kind] == header


def test_pack_missing_entry_rejected(tmp_path, zh_pack):
    import shutil
    from importlib import resources

    src = resources.files("zsner").joinpath("packs", "zh")
    dst = tmp_path / "broken"
    shutil.copytree(str(src), dst)
    (dst / "question.txt").unlink()
    (dst / "language.txt").write_text("zh", encoding="utf-8")
    with pytest.raises(PackError, match="question"):
        load_pack(str(dst))


def test_pack_unknown_placeholder_rejected(tmp_path):
    import shutil
    from importlib import resources

    src = resources.files("zsner").joinpath("packs", "zh")
    dst = tmp_path / "broken"
    shutil.copytree(str(src), dst)
    (dst / "question.txt").write_text("问题：{mystery}\n", encoding="utf-8")
    (dst / "language.txt").write_text("zh", encoding="utf-8")
    with pytest.raises(PackError, match="mystery"):
        load_pack(str(dst))
