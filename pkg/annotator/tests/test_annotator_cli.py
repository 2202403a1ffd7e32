import json

from syntax_annotator.cli import main


def test_export_command(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    data.write_text(
        json.dumps({"id": "s1", "text": "中国保险监管项目在京启动"}, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    out = tmp_path / "side.jsonl"
    code = main(["export", "--input", str(data), "--kinds", "segmentation", "pos",
                 "--out", str(out), "--lang", "zh"])
    assert code == 0
    rec = json.loads(out.read_text(encoding="utf-8"))
    assert rec["sentence_id"] == "s1"
    assert rec["segmentation"][0] == "中国"
    assert "backend=lexicon" in capsys.readouterr().out


def test_export_segmentation_for_en_is_error(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    data.write_text('{"id": "a", "text": "hi"}\n', encoding="utf-8")
    code = main(["export", "--input", str(data), "--kinds", "segmentation",
                 "--out", str(tmp_path / "o.jsonl"), "--lang", "en"])
    assert code == 2
    assert "Chinese" in capsys.readouterr().err


def test_export_unsupported_backend_kind_is_error(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    data.write_text('{"id": "a", "text": "中国"}\n', encoding="utf-8")
    code = main(["export", "--input", str(data), "--kinds", "dependency",
                 "--out", str(tmp_path / "o.jsonl"), "--lang", "zh"])
    assert code == 2
    assert "dependency" in capsys.readouterr().err


def test_unknown_backend_is_error(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    data.write_text('{"id": "a", "text": "中国"}\n', encoding="utf-8")
    code = main(["export", "--input", str(data), "--kinds", "pos",
                 "--out", str(tmp_path / "o.jsonl"), "--lang", "zh",
                 "--backend", "stanza"])
    assert code == 2
