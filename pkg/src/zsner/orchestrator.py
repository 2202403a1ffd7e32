"""Experiment execution: vanilla runs, decomposed-QA dialogues, SC variants.

A run directory holds everything needed to re-vote and re-score without
new model calls: manifest.json, raw_responses.jsonl (written by the
gateway store), and transcripts.jsonl with one dialogue instance per line.
Runs resume: sentences already recorded are skipped.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Dataset, Sentence, sample_subset
from .errors import BackendError, ConfigError
from .gateway import CompletionParams, Gateway
from .parsing import parse_response, serialize_answer
from .prompts import PromptPlan, build_decomposed_turn, build_vanilla_messages
from .syntax import SyntacticAnnotation
from .templates import TemplatePack
from .voting import SURFACE, VoteInput, vote

SC_LEVELS = ("off", "question_level", "sample_level")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Dataset
    plan: PromptPlan
    pack: TemplatePack
    params: CompletionParams
    run_id: str
    out_dir: str = "runs"
    sc: str = "off"
    sc_n: int = 5
    subset: tuple[int, int] | None = None  # (n, seed)
    annotations: dict[str, SyntacticAnnotation] = field(default_factory=dict)
    workers: int = 1
    vote_mode: str = SURFACE

    def __post_init__(self):
        if self.sc not in SC_LEVELS:
            raise ConfigError(f"unknown SC level {self.sc!r}")
        if self.sc == "question_level" and self.plan.mode != "decomposed":
            raise ConfigError("question-level SC is only defined for decomposed mode")
        if self.sc_n < 1:
            raise ConfigError("sc_n must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.run_id

    def semantic_dict(self) -> dict:
        """The fields that define the experiment; the manifest digest covers
        exactly these, so operational knobs (workers, backend) don't churn it."""
        plan = self.plan
        return {
            "dataset": self.dataset.name,
            "language": self.dataset.language,
            "label_order": list(self.dataset.label_order.labels),
            "label_display": list(self.dataset.label_order.display),
            "mode": plan.mode,
            "hint": (
                [plan.hint.kind.value, plan.hint.position, plan.hint.source]
                if plan.hint
                else None
            ),
            "tool_kinds": [k.value for k in plan.tool_kinds],
            "shots": [
                {"text": s.text, "answer": [[m.surface, m.label] for m in s.answer]}
                for s in plan.shots
            ],
            "pack": self.pack.language,
            "model_name": self.params.model_name,
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
            "sc": self.sc,
            "sc_n": self.sc_n,
            "subset": list(self.subset) if self.subset else None,
        }

    def digest(self) -> str:
        blob = json.dumps(self.semantic_dict(), ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class Turn:
    label: str
    samples: list[str]
    history_answer: str = ""

    def as_dict(self) -> dict:
        return {"label": self.label, "samples": list(self.samples),
                "history_answer": self.history_answer}


@dataclass
class SentenceRun:
    sentence_id: str
    mode: str
    samples: list[str] = field(default_factory=list)  # vanilla only
    instances: list[list[Turn]] = field(default_factory=list)  # decomposed only
    failed: bool = False
    error: str = ""

    def to_records(self) -> list[dict]:
        """Transcript lines, one dialogue instance per record."""
        if self.mode == "vanilla":
            return [{"sentence_id": self.sentence_id, "mode": "vanilla",
                     "instance": 0, "samples": list(self.samples)}]
        return [
            {
                "sentence_id": self.sentence_id,
                "mode": "decomposed",
                "instance": i,
                "turns": [t.as_dict() for t in turns],
            }
            for i, turns in enumerate(self.instances)
        ]


def _effective_n(cfg: ExperimentConfig) -> int:
    return cfg.sc_n if cfg.sc != "off" else 1


def run_vanilla(sentence: Sentence, cfg: ExperimentConfig, gateway: Gateway) -> SentenceRun:
    if cfg.plan.mode != "vanilla":
        raise ConfigError("run_vanilla requires a vanilla prompt plan")
    ann = cfg.annotations.get(sentence.id)
    messages = build_vanilla_messages(sentence, cfg.dataset.label_order, cfg.plan, cfg.pack, ann)
    params = replace(cfg.params, n_samples=_effective_n(cfg))
    texts = gateway.complete(messages, params)
    return SentenceRun(sentence_id=sentence.id, mode="vanilla", samples=texts)


def _run_dialogue(
    sentence: Sentence,
    cfg: ExperimentConfig,
    gateway: Gateway,
    instance: int,
    samples_per_turn: int,
) -> list[Turn]:
    ann = cfg.annotations.get(sentence.id)
    params = replace(cfg.params, n_samples=samples_per_turn)
    history: list[tuple[str, str]] = []
    turns: list[Turn] = []
    for label in cfg.dataset.label_order.labels:
        messages = build_decomposed_turn(
            sentence, label, history, cfg.plan, cfg.pack, ann,
            labels=cfg.dataset.label_order,
        )
        first_index = instance if samples_per_turn == 1 else 0
        texts = gateway.complete(messages, params, first_index=first_index)
        if cfg.sc == "question_level":
            parsed = tuple(tuple(parse_response(t).mentions) for t in texts)
            voted = vote(VoteInput(parsed), cfg.vote_mode)
            answer = serialize_answer(voted.mentions, cfg.pack.language)
        else:
            answer = texts[0]
        history.append((messages[-1]["content"], answer))
        turns.append(Turn(label=label, samples=texts, history_answer=answer))
    return turns


def run_decomposed(sentence: Sentence, cfg: ExperimentConfig, gateway: Gateway) -> SentenceRun:
    if cfg.plan.mode != "decomposed":
        raise ConfigError("run_decomposed requires a decomposed prompt plan")
    if cfg.sc == "sample_level":
        instances = [
            _run_dialogue(sentence, cfg, gateway, instance=k, samples_per_turn=1)
            for k in range(cfg.sc_n)
        ]
    elif cfg.sc == "question_level":
        instances = [_run_dialogue(sentence, cfg, gateway, 0, samples_per_turn=cfg.sc_n)]
    else:
        instances = [_run_dialogue(sentence, cfg, gateway, 0, samples_per_turn=1)]
    return SentenceRun(sentence_id=sentence.id, mode="decomposed", instances=instances)


def _run_sentence(sentence: Sentence, cfg: ExperimentConfig, gateway: Gateway) -> SentenceRun:
    runner = run_vanilla if cfg.plan.mode == "vanilla" else run_decomposed
    try:
        return runner(sentence, cfg, gateway)
    except BackendError as e:
        return SentenceRun(
            sentence_id=sentence.id, mode=cfg.plan.mode, failed=True,
            error=f"{sentence.id}: {e}",
        )


def _expected_instances(cfg: ExperimentConfig) -> int:
    if cfg.plan.mode == "decomposed" and cfg.sc == "sample_level":
        return cfg.sc_n
    return 1


def load_transcripts(run_dir: str | Path) -> dict[str, list[dict]]:
    """Transcript records grouped by sentence id, in file order."""
    path = Path(run_dir) / "transcripts.jsonl"
    grouped: dict[str, list[dict]] = {}
    if not path.exists():
        return grouped
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            grouped.setdefault(rec["sentence_id"], []).append(rec)
    return grouped


def load_manifest(run_dir: str | Path) -> dict | None:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class RunSummary:
    run_dir: str
    total: int
    ok: int
    failed: int
    new_calls: int
    cache_hits: int
    resumed: int
    failed_ids: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def run_experiment(cfg: ExperimentConfig, gateway: Gateway) -> RunSummary:
    """Process all (sampled) sentences, persist transcripts, write manifest.

    Sentences whose dialogue instances are already fully recorded are
    skipped; partially recorded sentences are compacted away and re-run
    (the response cache makes that free).
    """
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)

    existing = load_manifest(run_dir)
    if existing is not None and existing.get("config_digest") != cfg.digest():
        raise ConfigError(
            f"run directory {run_dir} was created with a different configuration"
        )

    dataset = cfg.dataset
    if cfg.subset is not None:
        dataset = sample_subset(dataset, cfg.subset[0], cfg.subset[1])

    expected = _expected_instances(cfg)
    recorded = load_transcripts(run_dir)
    done = {sid for sid, recs in recorded.items() if len(recs) >= expected}
    partial = {sid for sid in recorded if sid not in done}
    transcripts_path = run_dir / "transcripts.jsonl"
    if partial:
        with open(transcripts_path, "w", encoding="utf-8") as f:
            for sid, recs in recorded.items():
                if sid in done:
                    for rec in recs:
                        f.write(json.dumps(rec, ensure_ascii=False) + "\n")

    pending = [s for s in dataset.sentences if s.id not in done]
    resumed = len(done)
    ok = failed = 0
    failed_ids: list[str] = []
    write_lock = threading.Lock()

    def handle(result: SentenceRun):
        nonlocal ok, failed
        if result.failed:
            failed += 1
            failed_ids.append(result.sentence_id)
            return
        ok += 1
        with write_lock:
            with open(transcripts_path, "a", encoding="utf-8") as f:
                for rec in result.to_records():
                    f.write(json.dumps(rec, ensure_ascii=False) + "\n")

    if pending:
        if cfg.workers == 1:
            for sentence in pending:
                handle(_run_sentence(sentence, cfg, gateway))
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                for result in pool.map(
                    lambda s: _run_sentence(s, cfg, gateway), pending
                ):
                    handle(result)

        manifest = {
            "run_id": cfg.run_id,
            "created_at": (existing or {}).get(
                "created_at", time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
            ),
            "config_digest": cfg.digest(),
            "config": cfg.semantic_dict(),
            "subset_ids": [s.id for s in dataset.sentences] if cfg.subset else None,
            "counts": {"total": len(dataset.sentences), "ok": ok + resumed, "failed": failed},
            "failed_ids": failed_ids,
        }
        with open(run_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2)
            f.write("\n")

    return RunSummary(
        run_dir=str(run_dir),
        total=len(dataset.sentences),
        ok=ok + resumed,
        failed=failed,
        new_calls=gateway.calls,
        cache_hits=gateway.cache_hits,
        resumed=resumed,
        failed_ids=failed_ids,
    )
