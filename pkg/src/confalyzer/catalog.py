"""Catalog of configurator-specific usability criteria.

The built-in catalog holds 18 evaluation questions grouped into four
categories (configuration process, explanation, navigation, visualization).
Each criterion's description is the exact question text injected into the
analysis prompt, so it is stored verbatim and validated on load.

Catalog documents are JSON: either a bare array of criterion records or a
versioned wrapper ``{"schema": 1, "criteria": [...]}``. Each record is
``{id, category, name, description, references[]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import ConfalyzerError

CATALOG_SCHEMA_VERSION = 1

_ID_PATTERN = re.compile(r"^([A-Z])([1-9])$")


class CatalogError(ConfalyzerError):
    """Invalid catalog document or criterion lookup failure."""


class Category(Enum):
    CONFIGURATION_PROCESS = "configuration_process"
    EXPLANATION = "explanation"
    NAVIGATION = "navigation"
    VISUALIZATION = "visualization"

    @property
    def letter(self) -> str:
        return _CATEGORY_LETTER[self]


_CATEGORY_LETTER = {
    Category.CONFIGURATION_PROCESS: "C",
    Category.EXPLANATION: "E",
    Category.NAVIGATION: "N",
    Category.VISUALIZATION: "V",
}
_LETTER_CATEGORY = {v: k for k, v in _CATEGORY_LETTER.items()}

# Highest criterion number defined per category.
_CATEGORY_RANGE = {"C": 6, "E": 4, "N": 6, "V": 2}


@dataclass(frozen=True)
class CriterionId:
    """Short criterion token such as "C4" or "N5".

    The leading letter selects the category; the digit must fall inside
    that category's defined range (C1-C6, E1-E4, N1-N6, V1-V2).
    """

    value: str

    def __post_init__(self) -> None:
        match = _ID_PATTERN.match(self.value)
        if not match:
            raise CatalogError(f"malformed criterion id {self.value!r}: expected <letter><digit>")
        letter, digit = match.group(1), int(match.group(2))
        if letter not in _CATEGORY_RANGE:
            raise CatalogError(f"malformed criterion id {self.value!r}: unknown category letter {letter!r}")
        if digit > _CATEGORY_RANGE[letter]:
            raise CatalogError(
                f"malformed criterion id {self.value!r}: {letter} criteria range from "
                f"{letter}1 to {letter}{_CATEGORY_RANGE[letter]}"
            )

    @property
    def category(self) -> Category:
        return _LETTER_CATEGORY[self.value[0]]

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Criterion:
    id: CriterionId
    category: Category
    name: str
    description: str
    references: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.category is not self.id.category:
            raise CatalogError(
                f"criterion {self.id}: category {self.category.value!r} does not match id letter"
            )
        if not self.name.strip():
            raise CatalogError(f"criterion {self.id}: empty name")
        if not self.description.strip():
            raise CatalogError(f"criterion {self.id}: empty description")
        if not self.description.rstrip().endswith("?"):
            raise CatalogError(f"criterion {self.id}: description must be phrased as a question")


@dataclass(frozen=True)
class Catalog:
    """Ordered, duplicate-free collection of criteria."""

    criteria: tuple[Criterion, ...]
    _by_id: dict[str, Criterion] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[str, Criterion] = {}
        for criterion in self.criteria:
            key = criterion.id.value
            if key in by_id:
                raise CatalogError(f"duplicate criterion id {key!r}")
            by_id[key] = criterion
        object.__setattr__(self, "_by_id", by_id)

    def __iter__(self):
        return iter(self.criteria)

    def __len__(self) -> int:
        return len(self.criteria)

    def ids(self) -> list[str]:
        return [c.id.value for c in self.criteria]

    def get(self, criterion_id: str | CriterionId) -> Criterion:
        key = str(criterion_id)
        try:
            return self._by_id[key]
        except KeyError:
            raise CatalogError(f"unknown criterion id {key!r}") from None

    def category_counts(self) -> dict[Category, int]:
        counts = {category: 0 for category in Category}
        for criterion in self.criteria:
            counts[criterion.category] += 1
        return counts

    def to_records(self) -> list[dict]:
        return [
            {
                "id": c.id.value,
                "category": c.category.value,
                "name": c.name,
                "description": c.description,
                "references": list(c.references),
            }
            for c in self.criteria
        ]

    def to_document(self) -> dict:
        return {"schema": CATALOG_SCHEMA_VERSION, "criteria": self.to_records()}


def _criterion_from_record(record: dict) -> Criterion:
    try:
        raw_id = record["id"]
        category = record["category"]
        name = record["name"]
        description = record["description"]
    except (KeyError, TypeError) as exc:
        raise CatalogError(f"criterion record missing field: {exc}") from None
    try:
        cat = Category(category)
    except ValueError:
        raise CatalogError(f"criterion {raw_id!r}: unknown category {category!r}") from None
    return Criterion(
        id=CriterionId(raw_id),
        category=cat,
        name=name,
        description=description,
        references=tuple(record.get("references", ())),
    )


def catalog_from_records(records: list[dict]) -> Catalog:
    return Catalog(criteria=tuple(_criterion_from_record(r) for r in records))


def load_catalog_document(document) -> Catalog:
    """Build a Catalog from a parsed JSON document (array or versioned wrapper)."""
    if isinstance(document, dict):
        schema = document.get("schema")
        if schema != CATALOG_SCHEMA_VERSION:
            raise CatalogError(f"unsupported catalog schema {schema!r}")
        records = document.get("criteria")
    else:
        records = document
    if not isinstance(records, list):
        raise CatalogError("catalog document must be an array of criterion records")
    return catalog_from_records(records)


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate a catalog file, preserving record order."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogError(f"cannot read catalog file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog file {path} is not valid JSON: {exc}") from exc
    return load_catalog_document(document)


def builtin_catalog() -> Catalog:
    """Return the 18 built-in criteria shipped with the package."""
    text = resources.files("confalyzer.data").joinpath("criteria.json").read_text(encoding="utf-8")
    return load_catalog_document(json.loads(text))


def criteria_subset(catalog: Catalog, ids: list[str]) -> Catalog:
    """Restrict a catalog to the given ids, keeping catalog order."""
    known = set(catalog.ids())
    unknown = [i for i in ids if i not in known]
    if unknown:
        raise CatalogError(f"unknown criterion id(s): {', '.join(unknown)}")
    wanted = set(ids)
    return Catalog(criteria=tuple(c for c in catalog.criteria if c.id.value in wanted))
