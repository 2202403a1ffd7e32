"""Two-stage majority voting over sampled responses.

Stage one keeps a candidate mention surface only if it appears in more
than half of the responses (a response counts once per surface, whatever
the label). Stage two gives each kept surface the label predicted by the
most responses; ties break to the label seen earliest in sample order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Mention
from .errors import ShapeError
from .parsing import parse_response

SURFACE = "surface"  # stage-1 counts label-agnostic surface appearances
PAIR = "pair"  # alternative: stage-1 counts exact (surface, label) pairs


@dataclass
class CandidateAudit:
    surface: str
    appearances: int
    label_counts: dict[str, int] = field(default_factory=dict)
    kept: bool = False
    tie: bool = False
    kept_labels: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "surface": self.surface,
            "appearances": self.appearances,
            "label_counts": dict(self.label_counts),
            "kept": self.kept,
            "tie": self.tie,
            "kept_labels": list(self.kept_labels),
        }


@dataclass
class VoteResult:
    mentions: list[Mention]
    audit: list[CandidateAudit]


@dataclass(frozen=True)
class VoteInput:
    responses: tuple[tuple[Mention, ...], ...]

    def __post_init__(self):
        if len(self.responses) == 0:
            raise ValueError("vote needs at least one response")


def _dedup(mentions) -> list[Mention]:
    seen = set()
    out = []
    for m in mentions:
        key = (m.surface, m.label)
        if key not in seen:
            seen.add(key)
            out.append(m)
    return out


def vote(vote_input: VoteInput, mode: str = SURFACE) -> VoteResult:
    """Majority-vote n responses down to one mention list.

    `mode` selects the stage-1 appearance semantics: `surface` (default)
    counts a response that mentions the surface under any label; `pair`
    requires the exact (surface, label) pair to clear the majority.
    """
    if mode not in (SURFACE, PAIR):
        raise ValueError(f"unknown vote mode {mode!r}")
    responses = [_dedup(r) for r in vote_input.responses]
    n = len(responses)
    majority = n // 2 + 1  # strictly more than half

    surface_votes: dict[str, set[int]] = {}
    pair_votes: dict[tuple[str, str], set[int]] = {}
    first_seen: dict[str, tuple[int, int]] = {}
    first_seen_pair: dict[tuple[str, str], tuple[int, int]] = {}
    for idx, response in enumerate(responses):
        for pos, m in enumerate(response):
            surface_votes.setdefault(m.surface, set()).add(idx)
            pair_votes.setdefault((m.surface, m.label), set()).add(idx)
            first_seen.setdefault(m.surface, (idx, pos))
            first_seen_pair.setdefault((m.surface, m.label), (idx, pos))

    audits: list[CandidateAudit] = []
    for surface in sorted(surface_votes, key=lambda s: first_seen[s]):
        labels = {l: len(v) for (s, l), v in pair_votes.items() if s == surface}
        audit = CandidateAudit(
            surface=surface,
            appearances=len(surface_votes[surface]),
            label_counts=labels,
        )
        if mode == SURFACE:
            if audit.appearances >= majority:
                best = max(labels.values())
                top = [l for l, c in labels.items() if c == best]
                audit.tie = len(top) > 1
                audit.kept = True
                audit.kept_labels = [
                    min(top, key=lambda l: first_seen_pair[(surface, l)])
                ]
        else:
            # every pair clearing the majority survives in pair mode
            cleared = [l for l, c in labels.items() if c >= majority]
            if cleared:
                audit.kept = True
                audit.kept_labels = sorted(
                    cleared, key=lambda l: first_seen_pair[(surface, l)]
                )
        audits.append(audit)

    kept = [a for a in audits if a.kept]
    kept.sort(key=lambda a: (-a.appearances, first_seen[a.surface]))
    mentions: list[Mention] = []
    for a in kept:
        mentions.extend(Mention(surface=a.surface, label=l) for l in a.kept_labels)
    return VoteResult(mentions=mentions, audit=audits)


# -- voting over stored runs -------------------------------------------------

QUESTION_LEVEL = "question_level"
SAMPLE_LEVEL = "sample_level"
OFF = "off"


def _parsed(samples: list[str]) -> list[list[Mention]]:
    return [parse_response(s).mentions for s in samples]


def _instance_union(turns: list[dict]) -> list[Mention]:
    out: list[Mention] = []
    for turn in turns:
        out.extend(parse_response(turn["samples"][0]).mentions)
    return _dedup(out)


def vote_records(records: list[dict], level: str, mode: str = SURFACE) -> VoteResult:
    """Vote the transcript records of one sentence down to final mentions.

    Records are transcript lines as written by the orchestrator. Vanilla
    records vote across their samples; decomposed records vote per turn
    (question level) or across full-dialogue unions (sample level).
    """
    if not records:
        raise ShapeError("no transcript records for sentence")
    modes = {r.get("mode") for r in records}
    if len(modes) != 1:
        raise ShapeError(f"mixed record modes {sorted(modes)}")
    rec_mode = modes.pop()

    if rec_mode == "vanilla":
        if len(records) != 1:
            raise ShapeError("vanilla run should have one transcript record per sentence")
        responses = _parsed(records[0]["samples"])
        return vote(VoteInput(tuple(tuple(r) for r in responses)), mode)

    if rec_mode != "decomposed":
        raise ShapeError(f"unknown record mode {rec_mode!r}")

    if level == SAMPLE_LEVEL:
        for rec in records:
            if any(len(t["samples"]) != 1 for t in rec["turns"]):
                raise ShapeError("sample-level voting expects one sample per turn")
        unions = [_instance_union(rec["turns"]) for rec in sorted(records, key=lambda r: r["instance"])]
        return vote(VoteInput(tuple(tuple(u) for u in unions)), mode)

    if level == QUESTION_LEVEL:
        if len(records) != 1:
            raise ShapeError("question-level voting expects a single dialogue instance")
        final: list[Mention] = []
        audits: list[CandidateAudit] = []
        for turn in records[0]["turns"]:
            result = vote(VoteInput(tuple(tuple(r) for r in _parsed(turn["samples"]))), mode)
            final.extend(result.mentions)
            audits.extend(result.audit)
        return VoteResult(mentions=_dedup(final), audit=audits)

    if level == OFF:
        if len(records) != 1:
            raise ShapeError("a non-SC run has a single dialogue instance")
        return VoteResult(mentions=_instance_union(records[0]["turns"]), audit=[])

    raise ShapeError(f"unknown SC level {level!r}")


def vote_run(run, level: str, mode: str = SURFACE) -> VoteResult:
    """Vote an in-memory SentenceRun (see orchestrator) at the given level."""
    return vote_records(run.to_records(), level, mode)
