"""Batch export of annotation sidecar files.

Reads a dataset JSONL ({"id", "text", ...} per line), runs the parser
backend over each sentence, and writes one sidecar record per sentence:
{"sentence_id", <requested kinds>, "parser": {"backend", "version"}}.
A sentence the parser cannot handle becomes an error record and the job
continues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .backends import ALL_KINDS, NOUN_PHRASES, SEGMENTATION, BackendError


class JobError(Exception):
    pass


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    output_path: str
    kinds: tuple[str, ...]
    language: str = "zh"

    def __post_init__(self):
        unknown = [k for k in self.kinds if k not in ALL_KINDS]
        if unknown:
            raise JobError(f"unknown annotation kinds: {unknown}")
        if not self.kinds:
            raise JobError("no annotation kinds requested")
        if self.language not in ("zh", "en"):
            raise JobError(f"unsupported language {self.language!r}")
        if self.language != "zh" and SEGMENTATION in self.kinds:
            raise JobError("word segmentation is only defined for Chinese input")
        if NOUN_PHRASES in self.kinds:
            raise JobError("no parser backend extracts noun phrases reliably")


def read_sentences(path: str) -> list[tuple[str, str]]:
    sentences: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise JobError(f"{path} line {lineno}: invalid JSON ({e.msg})") from e
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise JobError(f"{path} line {lineno}: record needs 'id' and 'text'")
            sentences.append((str(rec["id"]), str(rec["text"])))
    return sentences


def annotate_one(backend, sentence_id: str, text: str, language: str, kinds: list[str]) -> dict:
    """One sidecar record; parser trouble becomes an error record."""
    supported = backend.supported_kinds(language)
    missing = [k for k in kinds if k not in supported]
    if missing:
        raise JobError(
            f"backend {backend.name!r} cannot produce {missing} for language {language!r}"
        )
    record = {"sentence_id": sentence_id}
    try:
        record.update(backend.parse(text, language, list(kinds)))
    except BackendError as e:
        return {"sentence_id": sentence_id, "error": str(e)}
    record["parser"] = {"backend": backend.name, "version": backend.version}
    return record


def export(job: ExportJob, backend) -> dict:
    """Run the job, write the sidecar JSONL, return a summary."""
    sentences = read_sentences(job.input_path)
    ok = failed = 0
    with open(job.output_path, "w", encoding="utf-8") as f:
        for sentence_id, text in sentences:
            record = annotate_one(backend, sentence_id, text, job.language, list(job.kinds))
            if "error" in record:
                failed += 1
            else:
                ok += 1
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    return {"total": len(sentences), "ok": ok, "failed": failed, "output": job.output_path}
