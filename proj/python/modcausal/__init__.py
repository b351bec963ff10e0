"""Python access to the modcausal estimation library."""

from ._core import (
    ParseError,
    UnclassifiableActionSet,
    analyze,
    classify_severity,
    dr_ate,
    format_effect,
    link_cases,
    simulate,
)

__all__ = [
    "ParseError",
    "UnclassifiableActionSet",
    "analyze",
    "classify_severity",
    "dr_ate",
    "format_effect",
    "link_cases",
    "simulate",
]
