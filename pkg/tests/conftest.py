from pathlib import Path

import pytest

from zsner.corpus import LabelOrder, Mention, Sentence
from zsner.syntax import load_annotations
from zsner.templates import load_pack

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / "prompts" / f"{name}.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def zh_pack():
    return load_pack("zh")


@pytest.fixture(scope="session")
def en_pack():
    return load_pack("en")


@pytest.fixture
def zh_sentence():
    return Sentence(
        id="onto4-ex",
        text="中国保险监管项目在京启动",
        gold=(Mention("中国", "地缘政治实体"), Mention("京", "地缘政治实体")),
    )


@pytest.fixture
def zh_order():
    return LabelOrder(
        labels=("人名", "地名", "机构名称", "地缘政治实体"),
        display_labels=("地缘政治实体", "机构名称", "地名", "人名"),
    )


@pytest.fixture
def zh_ann(zh_sentence):
    anns = load_annotations(FIXTURES / "annotations_zh.jsonl", {zh_sentence.id: zh_sentence})
    return anns[zh_sentence.id]


@pytest.fixture
def en_sentence():
    return Sentence(
        id="ace05-ex",
        text="Could Tony Blair be in line for a gold medal ?",
        gold=(Mention("Tony Blair", "Person"),),
    )


@pytest.fixture
def en_order():
    return LabelOrder(
        labels=(
            "Person", "Organization", "Location", "Facility",
            "Weapon", "Vehicle", "Geo-Political Entity",
        )
    )


@pytest.fixture
def en_ann(en_sentence):
    anns = load_annotations(FIXTURES / "annotations_en.jsonl", {en_sentence.id: en_sentence})
    return anns[en_sentence.id]
