"""Prompt rendering for per-criterion analysis calls.

One rendered prompt covers exactly one criterion. The system text carries
the criterion-independent instructions (severity scale, output record); the
user template names the configurator and injects the criterion question via
``{placeholder}`` substitution. Placeholders use single braces with no
escaping: templates may not contain literal braces.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .catalog import Criterion, CriterionId
from .errors import ConfalyzerError

SEVERITY_LABELS = ("no issue", "minor issue", "major issue")

SUPPORTED_PLACEHOLDERS = (
    "criterion_id",
    "criterion_name",
    "criterion_description",
    "configurator_name",
    "industry",
)

_PLACEHOLDER = re.compile(r"\{([^{}]*)\}")

DEFAULT_SYSTEM_TEXT = """\
You are a usability analyst evaluating the user interface of a product \
configurator. You are given a screen recording of a user interacting with \
the configurator and exactly one usability criterion, phrased as a question. \
Evaluate only that criterion, based only on what the recording shows.

Rate the severity of any usability issue on a 3-point scale:
- "no issue": the criterion is fulfilled.
- "minor issue": the criterion is only partially fulfilled.
- "major issue": the criterion is not fulfilled at all.

If the severity is not "no issue", describe the issue concretely (naming the \
interface elements involved) and explain how it can be improved. A feature \
that exists but does not adequately support users still counts as an issue.

Respond with a single JSON object and nothing else, containing exactly these \
string fields: "severity" (one of "no issue", "minor issue", "major issue"), \
"issue" (the issue description, empty when severity is "no issue"), and \
"improvement" (the improvement suggestion, empty when severity is "no issue").
"""

DEFAULT_USER_TEMPLATE = """\
Configurator under evaluation: {configurator_name} (industry: {industry}).

Evaluate the screen recording against this usability criterion:

Criterion {criterion_id} - {criterion_name}:
{criterion_description}
"""


class TemplateError(ConfalyzerError):
    """Malformed template or unresolvable placeholder."""


@dataclass(frozen=True)
class PromptTemplatePair:
    system_text: str
    user_template: str

    def __post_init__(self) -> None:
        if _PLACEHOLDER.search(self.system_text):
            raise TemplateError("system text must not contain placeholders")
        names = placeholder_names(self.user_template)
        for required in ("criterion_name", "criterion_description"):
            if required not in names:
                raise TemplateError(f"user template must contain {{{required}}}")


@dataclass(frozen=True)
class RenderedPrompt:
    system_text: str
    user_text: str
    criterion_id: CriterionId
    sample_id: int


def placeholder_names(template: str) -> list[str]:
    """Names of all ``{...}`` placeholders, in order of appearance."""
    stripped = _PLACEHOLDER.sub("", template)
    if "{" in stripped or "}" in stripped:
        raise TemplateError("template contains unbalanced or nested braces")
    return [m.group(1) for m in _PLACEHOLDER.finditer(template)]


def default_templates() -> PromptTemplatePair:
    """The shipped template pair."""
    return PromptTemplatePair(system_text=DEFAULT_SYSTEM_TEXT, user_template=DEFAULT_USER_TEMPLATE)


def load_templates(path: str | Path) -> PromptTemplatePair:
    """Load a ``{system_text, user_template}`` JSON document."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TemplateError(f"cannot read template file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TemplateError(f"template file {path} is not valid JSON: {exc}") from exc
    try:
        return PromptTemplatePair(
            system_text=document["system_text"], user_template=document["user_template"]
        )
    except (KeyError, TypeError):
        raise TemplateError(
            f"template file {path} must contain system_text and user_template"
        ) from None


def render(templates: PromptTemplatePair, criterion: Criterion, sample) -> RenderedPrompt:
    """Substitute one criterion and one sample into the user template.

    Pure and deterministic: identical inputs render byte-identical prompts.
    """
    values = {
        "criterion_id": criterion.id.value,
        "criterion_name": criterion.name,
        "criterion_description": criterion.description,
        "configurator_name": sample.name,
        "industry": sample.industry,
    }

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in SUPPORTED_PLACEHOLDERS:
            raise TemplateError(f"unknown placeholder {{{name}}} in user template")
        value = values[name]
        if value is None or not str(value).strip():
            raise TemplateError(f"no value available for placeholder {{{name}}}")
        value = str(value)
        if "{" in value or "}" in value:
            raise TemplateError(f"value for placeholder {{{name}}} contains braces")
        return value

    placeholder_names(templates.user_template)  # reject stray braces up front
    user_text = _PLACEHOLDER.sub(substitute, templates.user_template)
    return RenderedPrompt(
        system_text=templates.system_text,
        user_text=user_text,
        criterion_id=criterion.id,
        sample_id=sample.id,
    )
