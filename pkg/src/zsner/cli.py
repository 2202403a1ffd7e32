"""Command-line surface: run experiments, vote, score, analyze, annotate.

The pipeline is split into run -> vote -> eval stages over durable files,
so model calls happen once and analysis can iterate freely.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import tomli

from . import corpus, parsing, scoring, voting
from .errors import ZsnerError
from .gateway import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_RETRY_MAX,
    DEFAULT_TEMPERATURE,
    SC_TEMPERATURE,
    CompletionParams,
    Gateway,
    GatewayConfig,
    ResponseStore,
)
from .orchestrator import ExperimentConfig, load_manifest, load_transcripts, run_experiment
from .prompts import Demonstration, Hint, PromptPlan, build_order_elicitation
from .syntax import SyntaxKind, annotation_from_record, fetch_annotations, load_annotations
from .templates import load_pack

_CONFIG_SCHEMA = {
    "dataset": {"path", "format", "name", "language", "label_order", "labels", "annotations"},
    "prompt": {"pack", "mode", "hint_kind", "hint_position", "hint_source", "tool_kinds", "shots"},
    "llm": {
        "backend", "endpoint_url", "api_key_env", "model_name", "temperature",
        "max_tokens", "rpm_ceiling", "retry_max", "timeout_s", "mock_response",
    },
    "run": {"run_id", "out_dir", "sc", "sc_n", "subset_n", "subset_seed", "workers", "vote_mode"},
}


class CliError(ZsnerError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as f:
            config = tomli.load(f)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as e:
        raise CliError(f"config file {path}: {e}") from None
    for section, keys in config.items():
        if section not in _CONFIG_SCHEMA:
            raise CliError(f"config section [{section}] is not recognized")
        unknown = set(keys) - _CONFIG_SCHEMA[section]
        if unknown:
            raise CliError(f"config section [{section}] has unknown keys: {sorted(unknown)}")
    return config


def _load_demos(path: str) -> tuple[Demonstration, ...]:
    shots = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "text" not in rec or "entities" not in rec:
                raise CliError(f"{path} line {lineno}: demo needs 'text' and 'entities'")
            answer = tuple(
                corpus.Mention(surface=e["text"], label=e["label"]) for e in rec["entities"]
            )
            ann = None
            if any(k in rec for k in ("segmentation", "pos", "constituency", "dependency", "noun_phrases")):
                ann_rec = {k: v for k, v in rec.items() if k != "entities"}
                ann_rec.setdefault("sentence_id", rec.get("id", f"demo-{lineno}"))
                ann_rec.pop("text", None)
                ann_rec.pop("id", None)
                ann = annotation_from_record(ann_rec)
            shots.append(Demonstration(text=rec["text"], answer=answer, annotation=ann))
    return tuple(shots)


def _build_dataset(cfg: dict) -> corpus.Dataset:
    d = cfg.get("dataset", {})
    if "path" not in d:
        raise CliError("config needs [dataset].path")
    order = None
    if "label_order" in d:
        order = corpus.load_label_order(d["label_order"], display_path=d.get("labels"))
    return corpus.load_dataset(
        d["path"],
        d.get("format", "jsonl"),
        name=d.get("name"),
        language=d.get("language", "zh"),
        label_order=order,
    )


def _build_plan(cfg: dict) -> PromptPlan:
    p = cfg.get("prompt", {})
    hint = None
    if "hint_kind" in p:
        hint = Hint(
            kind=SyntaxKind(p["hint_kind"]),
            position=p.get("hint_position", "front"),
            source=p.get("hint_source", "self"),
        )
    shots = _load_demos(p["shots"]) if "shots" in p else ()
    return PromptPlan(
        mode=p.get("mode", "vanilla"),
        hint=hint,
        tool_kinds=tuple(SyntaxKind(k) for k in p.get("tool_kinds", [])),
        shots=shots,
    )


def _build_experiment(cfg: dict, args) -> tuple[ExperimentConfig, GatewayConfig, str]:
    dataset = _build_dataset(cfg)
    plan = _build_plan(cfg)
    if args.mode:
        plan = PromptPlan(mode=args.mode, hint=plan.hint, tool_kinds=plan.tool_kinds, shots=plan.shots)

    run = cfg.get("run", {})
    sc = args.sc or run.get("sc", "off")
    sc_n = run.get("sc_n", 5)
    llm = cfg.get("llm", {})
    temperature = llm.get("temperature")
    if temperature is None:
        temperature = SC_TEMPERATURE if sc != "off" else DEFAULT_TEMPERATURE
    params = CompletionParams(
        model_name=llm.get("model_name", "gpt-3.5-turbo"),
        temperature=float(temperature),
        max_tokens=llm.get("max_tokens", DEFAULT_MAX_TOKENS),
    )

    prompt = cfg.get("prompt", {})
    pack = load_pack(prompt.get("pack", dataset.language))
    if pack.language != dataset.language:
        raise CliError(
            f"template pack language {pack.language!r} does not match dataset "
            f"language {dataset.language!r}"
        )

    annotations = {}
    if "annotations" in cfg.get("dataset", {}):
        annotations = load_annotations(cfg["dataset"]["annotations"], dataset.by_id())
    elif plan.tool_kinds:
        raise CliError("tool augmentation needs [dataset].annotations")

    subset = None
    subset_n = args.subset_n or run.get("subset_n")
    if subset_n:
        subset = (int(subset_n), int(args.seed if args.seed is not None else run.get("subset_seed", 0)))

    run_id = args.run_id or run.get("run_id")
    if not run_id:
        raise CliError("config needs [run].run_id (or pass --run-id)")

    experiment = ExperimentConfig(
        dataset=dataset,
        plan=plan,
        pack=pack,
        params=params,
        run_id=run_id,
        out_dir=run.get("out_dir", "runs"),
        sc=sc,
        sc_n=int(sc_n),
        subset=subset,
        annotations=annotations,
        workers=int(run.get("workers", 1)),
        vote_mode=run.get("vote_mode", voting.SURFACE),
    )
    gw_config = GatewayConfig(
        backend=args.backend or llm.get("backend", "mock"),
        endpoint_url=llm.get("endpoint_url", ""),
        api_key_env=llm.get("api_key_env", "OPENAI_API_KEY"),
        model_name=params.model_name,
        rpm_ceiling=int(llm.get("rpm_ceiling", 0)),
        retry_max=int(llm.get("retry_max", DEFAULT_RETRY_MAX)),
        timeout_s=float(llm.get("timeout_s", 60.0)),
    )
    return experiment, gw_config, llm.get("mock_response", "[]")


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    experiment, gw_config, mock_response = _build_experiment(cfg, args)
    store = ResponseStore(experiment.run_dir / "raw_responses.jsonl")
    gateway = Gateway.from_config(gw_config, store=store, mock_script=mock_response)
    summary = run_experiment(experiment, gateway)
    if summary.resumed and summary.new_calls == 0 and summary.failed == 0:
        print(f"resumed, 0 new calls ({summary.ok}/{summary.total} sentences recorded)")
    else:
        print(
            f"run {experiment.run_id}: {summary.ok}/{summary.total} ok, "
            f"{summary.failed} failed, {summary.new_calls} backend calls, "
            f"{summary.cache_hits} cache hits"
        )
    if summary.failed:
        print(f"failed sentences: {summary.failed_ids}", file=sys.stderr)
        return 1
    return 0


def _predictions_path(run_dir: Path, out: str | None) -> Path:
    return Path(out) if out else run_dir / "predictions.jsonl"


def cmd_vote(args) -> int:
    run_dir = Path(args.run_dir)
    manifest = load_manifest(run_dir)
    if manifest is None:
        raise CliError(f"no manifest in {run_dir}; run the experiment first")
    transcripts = load_transcripts(run_dir)
    if not transcripts:
        raise CliError(f"no transcripts in {run_dir}")
    level = args.level or manifest["config"]["sc"]
    mode = args.vote_mode or manifest["config"].get("vote_mode", voting.SURFACE)

    pred_path = _predictions_path(run_dir, args.out)
    votes_path = run_dir / "votes.jsonl"
    with open(pred_path, "w", encoding="utf-8") as pf, open(votes_path, "w", encoding="utf-8") as vf:
        for sid, records in transcripts.items():
            result = voting.vote_records(records, level, mode)
            pf.write(
                json.dumps(
                    {"id": sid, "entities": [m.as_dict() for m in result.mentions]},
                    ensure_ascii=False,
                )
                + "\n"
            )
            vf.write(
                json.dumps(
                    {"sentence_id": sid, "candidates": [a.as_dict() for a in result.audit]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"wrote {pred_path} ({len(transcripts)} sentences, level={level}, mode={mode})")
    return 0


def _load_predictions(path: str) -> dict[str, list[corpus.Mention]]:
    preds: dict[str, list[corpus.Mention]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "id" not in rec or "entities" not in rec:
                raise CliError(f"{path} line {lineno}: prediction needs 'id' and 'entities'")
            preds[str(rec["id"])] = [
                corpus.Mention(surface=e["text"], label=e["label"]) for e in rec["entities"]
            ]
    return preds


def _dataset_for_eval(args) -> corpus.Dataset:
    order = None
    if args.label_order:
        order = corpus.load_label_order(args.label_order, display_path=args.labels)
    return corpus.load_dataset(
        args.dataset, args.format, language=args.language, label_order=order
    )


def _restrict(dataset: corpus.Dataset, ids: set[str]) -> corpus.Dataset:
    from dataclasses import replace

    known = {s.id for s in dataset.sentences}
    unknown = ids - known
    if unknown:
        raise CliError(f"predictions reference unknown sentence ids: {sorted(unknown)[:5]}")
    kept = tuple(s for s in dataset.sentences if s.id in ids)
    return replace(dataset, sentences=kept)


def cmd_eval(args) -> int:
    dataset = _dataset_for_eval(args)
    all_metrics = []
    for pred_path in args.predictions:
        preds = _load_predictions(pred_path)
        subset = _restrict(dataset, set(preds))
        out_dir = Path(args.out) if args.out and len(args.predictions) == 1 else None
        result = scoring.aggregate_report(preds, subset, out_dir)
        m = result["metrics"]
        all_metrics.append(scoring.Metrics(tp=m["tp"], fp=m["fp"], fn=m["fn"]))
        print(
            f"{pred_path}: P={m['precision']:.4f} R={m['recall']:.4f} F1={m['f1']:.4f} "
            f"(tp={m['tp']} fp={m['fp']} fn={m['fn']})"
        )
    if len(all_metrics) > 1:
        summary = scoring.summarize_metrics(all_metrics)
        f1 = summary["f1"]
        print(f"mean F1={f1['mean']:.4f} (std {f1['std']:.4f}) over {len(all_metrics)} runs")
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "summary.json").write_text(
                json.dumps(summary, indent=2) + "\n", encoding="utf-8"
            )
    return 0


def cmd_errors(args) -> int:
    dataset = _dataset_for_eval(args)
    preds = _load_predictions(args.predictions)
    subset = _restrict(dataset, set(preds))
    report = scoring.classify_errors_run(preds, subset)
    print(scoring.render_error_table(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "errors.jsonl", "w", encoding="utf-8") as f:
            for item in report.items:
                f.write(json.dumps(item, ensure_ascii=False) + "\n")
        (out / "report.md").write_text(
            "# Error analysis\n\n" + scoring.render_error_table(report) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_order(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    llm = cfg.get("llm", {})
    labels, _ = corpus._read_label_lines(args.labels)
    pack = load_pack(args.pack or cfg.get("prompt", {}).get("pack", args.language))
    messages = build_order_elicitation(labels, pack)

    gw_config = GatewayConfig(
        backend=args.backend or llm.get("backend", "mock"),
        endpoint_url=llm.get("endpoint_url", ""),
        api_key_env=llm.get("api_key_env", "OPENAI_API_KEY"),
        model_name=llm.get("model_name", "gpt-3.5-turbo"),
        retry_max=int(llm.get("retry_max", DEFAULT_RETRY_MAX)),
        timeout_s=float(llm.get("timeout_s", 60.0)),
    )
    gateway = Gateway.from_config(gw_config, mock_script=llm.get("mock_response", "[]"))
    params = CompletionParams(model_name=gw_config.model_name, temperature=DEFAULT_TEMPERATURE)
    response = gateway.complete(messages, params)[0]

    proposed = parsing.parse_label_sequence(response, labels)
    if proposed is None:
        raw_path = Path(args.out).with_suffix(".raw.txt")
        raw_path.write_text(response, encoding="utf-8")
        got = parsing.extract_ordered_strings(response)
        missing = [l for l in labels if l not in got]
        extra = [g for g in got if g not in labels]
        print(
            f"could not recover a full label order (missing {missing}, extra {extra}); "
            f"raw response saved to {raw_path}",
            file=sys.stderr,
        )
        return 1
    order = corpus.LabelOrder(labels=tuple(proposed), provenance="model-proposed")
    corpus.write_label_order(order, args.out)
    print(f"wrote {args.out}: {list(order.labels)}")
    return 0


def cmd_annotate(args) -> int:
    dataset = corpus.load_dataset(args.dataset, args.format, language=args.language)
    kinds = [SyntaxKind(k) for k in args.kinds]
    fetched = fetch_annotations(
        args.endpoint,
        list(dataset.sentences),
        kinds,
        dataset.language,
        args.out,
        timeout_s=args.timeout,
    )
    print(f"wrote {args.out} ({len(fetched)} records)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsner", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment from a TOML config")
    run.add_argument("-c", "--config", required=True)
    run.add_argument("--run-id", default=None)
    run.add_argument("--mode", choices=["vanilla", "decomposed"], default=None)
    run.add_argument("--sc", choices=["off", "question_level", "sample_level"], default=None)
    run.add_argument("--backend", choices=["live", "replay", "mock"], default=None)
    run.add_argument("--subset-n", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=cmd_run)

    vote = sub.add_parser("vote", help="majority-vote a recorded run into predictions")
    vote.add_argument("run_dir")
    vote.add_argument("--level", choices=["off", "question_level", "sample_level"], default=None)
    vote.add_argument("--vote-mode", choices=[voting.SURFACE, voting.PAIR], default=None)
    vote.add_argument("-o", "--out", default=None)
    vote.set_defaults(func=cmd_vote)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", required=True)
    common.add_argument("--format", choices=["jsonl", "conll"], default="jsonl")
    common.add_argument("--language", choices=["zh", "en"], default="zh")
    common.add_argument("--label-order", default=None)
    common.add_argument("--labels", default=None, help="display-order label file")

    ev = sub.add_parser("eval", parents=[common], help="score predictions against gold")
    ev.add_argument("predictions", nargs="+")
    ev.add_argument("-o", "--out", default=None)
    ev.set_defaults(func=cmd_eval)

    er = sub.add_parser("errors", parents=[common], help="classify prediction errors")
    er.add_argument("predictions")
    er.add_argument("-o", "--out", default=None)
    er.set_defaults(func=cmd_errors)

    order = sub.add_parser("order", help="ask the model for a label order")
    order.add_argument("--labels", required=True, help="label set file, one per line")
    order.add_argument("--out", required=True)
    order.add_argument("-c", "--config", default=None)
    order.add_argument("--pack", default=None)
    order.add_argument("--language", choices=["zh", "en"], default="zh")
    order.add_argument("--backend", choices=["live", "replay", "mock"], default=None)
    order.set_defaults(func=cmd_order)

    ann = sub.add_parser("annotate", help="fetch syntactic annotations from an exporter service")
    ann.add_argument("--endpoint", required=True)
    ann.add_argument("--dataset", required=True)
    ann.add_argument("--format", choices=["jsonl", "conll"], default="jsonl")
    ann.add_argument("--language", choices=["zh", "en"], default="zh")
    ann.add_argument("--kinds", nargs="+", required=True,
                     choices=[k.value for k in SyntaxKind])
    ann.add_argument("--out", required=True)
    ann.add_argument("--timeout", type=float, default=60.0)
    ann.set_defaults(func=cmd_annotate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ZsnerError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
