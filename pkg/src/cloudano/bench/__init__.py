from .generator import (
    ClosureError,
    Dataset,
    GenSpec,
    InfeasibleRangeError,
    gen_benchmark,
    gen_case,
    gen_metric_series,
)
from .augment import llm_augment_logs
from .templates import ScenarioTemplate, TemplateSet, load_templates

__all__ = [
    "ClosureError",
    "Dataset",
    "GenSpec",
    "InfeasibleRangeError",
    "ScenarioTemplate",
    "TemplateSet",
    "gen_benchmark",
    "gen_case",
    "gen_metric_series",
    "llm_augment_logs",
    "load_templates",
]
