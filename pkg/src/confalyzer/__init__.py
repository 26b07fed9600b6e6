"""Configurator UI usability audits with a multimodal LLM, plus the human
plausibility-review workflow and inter-rater agreement statistics."""

from .catalog import Catalog, Category, Criterion, CriterionId, builtin_catalog
from .errors import ConfalyzerError
from .findings import Finding, Severity

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "Category",
    "ConfalyzerError",
    "Criterion",
    "CriterionId",
    "Finding",
    "Severity",
    "builtin_catalog",
    "__version__",
]
