"""Zero-shot NER with chat LLMs.

Reasoning strategies for zero-shot named entity recognition: decomposed
question answering over labels, syntactic prompting and tool augmentation,
and self-consistency with two-stage majority voting, plus the evaluation
and error-taxonomy machinery to measure them.
"""

from .corpus import Dataset, LabelOrder, Mention, Sentence, load_dataset, load_label_order, sample_subset
from .gateway import CompletionParams, Gateway, GatewayConfig, MockBackend, ResponseStore
from .orchestrator import ExperimentConfig, SentenceRun, run_experiment
from .parsing import ParseOutcome, parse_response, serialize_answer
from .prompts import (
    Demonstration,
    Hint,
    PromptPlan,
    build_decomposed_turn,
    build_order_elicitation,
    build_vanilla_messages,
    render_hint,
)
from .scoring import ErrorReport, Metrics, aggregate_report, classify_errors, score
from .syntax import SyntacticAnnotation, SyntaxKind, load_annotations, render_syntax
from .templates import TemplatePack, load_pack
from .voting import VoteInput, VoteResult, vote, vote_records, vote_run

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LabelOrder", "Mention", "Sentence",
    "load_dataset", "load_label_order", "sample_subset",
    "CompletionParams", "Gateway", "GatewayConfig", "MockBackend", "ResponseStore",
    "ExperimentConfig", "SentenceRun", "run_experiment",
    "ParseOutcome", "parse_response", "serialize_answer",
    "Demonstration", "Hint", "PromptPlan",
    "build_decomposed_turn", "build_order_elicitation", "build_vanilla_messages", "render_hint",
    "ErrorReport", "Metrics", "aggregate_report", "classify_errors", "score",
    "SyntacticAnnotation", "SyntaxKind", "load_annotations", "render_syntax",
    "TemplatePack", "load_pack",
    "VoteInput", "VoteResult", "vote", "vote_records", "vote_run",
    "__version__",
]
