"""Conditional safety certificates: DSL, evaluation, registry and runtime session."""

from consert.dsl import SourceDocument, load_file, parse, parse_text
from consert.errors import ConsertError
from consert.evaluation import best_guarantee, evaluate_composition, evaluate_function, explain, match_demand
from consert.fmt import format_canonical
from consert.registry import Registry
from consert.session import apply_event, new_session, replay
from consert.validate import lint, validate

__all__ = [
    "ConsertError",
    "Registry",
    "SourceDocument",
    "apply_event",
    "best_guarantee",
    "evaluate_composition",
    "evaluate_function",
    "explain",
    "format_canonical",
    "lint",
    "load_file",
    "match_demand",
    "new_session",
    "parse",
    "parse_text",
    "replay",
    "validate",
]
