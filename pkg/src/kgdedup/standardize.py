"""Value standardization: per-property sequences of normalizing functions.

Functions act on two levels. Element-level functions transform individual
values (lowercase, trim, round, ...); list-level functions transform the
value list of a multi-value property (setify, sort, take_first). Element
standardization always runs before list standardization.
"""
from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

from .errors import PlanError
from .index import FlatDocument, FlatValue, Ref
from .schema import DatatypeCategory, MinimalDomainSpec

logger = logging.getLogger(__name__)


class Level(Enum):
    ELEMENT = "element"
    LIST = "list"


@dataclass(frozen=True)
class Standardizer:
    name: str
    params: tuple[tuple[str, float | int], ...] = ()

    @classmethod
    def of(cls, name: str, **params) -> "Standardizer":
        return cls(name, tuple(sorted(params.items())))

    def param(self, key: str):
        return dict(self.params)[key]

    def to_json(self) -> dict:
        out: dict = {"fn": self.name}
        if self.params:
            out["params"] = dict(self.params)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Standardizer":
        return cls.of(data["fn"], **data.get("params", {}))


_WS_RUN = re.compile(r"\s+")


def _strip_punctuation(s: str) -> str:
    return "".join(c for c in s if not unicodedata.category(c).startswith("P"))


def _strip_diacritics(s: str) -> str:
    decomposed = unicodedata.normalize("NFKD", s)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


@dataclass(frozen=True)
class CatalogEntry:
    level: Level
    applies_to: tuple[type, ...]
    param_spec: tuple[str, ...]
    fn: Callable


def _check_round_params(p: Mapping) -> None:
    if not isinstance(p.get("decimals"), int) or p["decimals"] < 0:
        raise PlanError("round requires integer param decimals >= 0")


def _check_take_first_params(p: Mapping) -> None:
    if not isinstance(p.get("k"), int) or p["k"] < 1:
        raise PlanError("take_first requires integer param k >= 1")


CATALOG: dict[str, CatalogEntry] = {
    "identity": CatalogEntry(Level.ELEMENT, (str, float, bool, Ref), (), lambda v, p: v),
    "lowercase": CatalogEntry(Level.ELEMENT, (str,), (), lambda v, p: v.lower()),
    "trim": CatalogEntry(Level.ELEMENT, (str,), (), lambda v, p: v.strip()),
    "collapse_whitespace": CatalogEntry(
        Level.ELEMENT, (str,), (), lambda v, p: _WS_RUN.sub(" ", v)
    ),
    "strip_punctuation": CatalogEntry(
        Level.ELEMENT, (str,), (), lambda v, p: _strip_punctuation(v)
    ),
    "strip_diacritics": CatalogEntry(
        Level.ELEMENT, (str,), (), lambda v, p: _strip_diacritics(v)
    ),
    "round": CatalogEntry(
        Level.ELEMENT, (float,), ("decimals",), lambda v, p: round(v, p["decimals"])
    ),
    "setify": CatalogEntry(Level.LIST, (), (), None),
    "sort": CatalogEntry(Level.LIST, (), (), None),
    "take_first": CatalogEntry(Level.LIST, (), ("k",), None),
}

_PARAM_CHECKS = {"round": _check_round_params, "take_first": _check_take_first_params}

MAX_SEQUENCE_LENGTH = 8


def validate_standardizer(st: Standardizer) -> CatalogEntry:
    entry = CATALOG.get(st.name)
    if entry is None:
        raise PlanError(f"unknown standardizer {st.name!r}")
    params = dict(st.params)
    unknown = set(params) - set(entry.param_spec)
    if unknown:
        raise PlanError(f"{st.name} does not take params {sorted(unknown)}")
    check = _PARAM_CHECKS.get(st.name)
    if check:
        check(params)
    elif entry.param_spec and set(entry.param_spec) - set(params):
        raise PlanError(f"{st.name} missing params")
    return entry


def standardize_value(v: FlatValue, seq: list[Standardizer]) -> FlatValue:
    """Left-to-right composition of element-level standardizers.

    Standardizers that do not apply to the value's type are skipped; Refs
    pass through silently (their content is standardized under sub-paths),
    anything else gets a warning.
    """
    for st in seq:
        entry = CATALOG[st.name]
        if isinstance(v, bool):
            applies = bool in entry.applies_to
        elif isinstance(v, Ref):
            applies = Ref in entry.applies_to
        elif isinstance(v, float):
            applies = float in entry.applies_to
        else:
            applies = str in entry.applies_to
        if not applies:
            if not isinstance(v, Ref):
                logger.warning("standardizer %s not applicable to %r, skipped", st.name, v)
            continue
        v = entry.fn(v, dict(st.params))
    return v


def _dedupe_key(v: FlatValue):
    return (type(v).__name__, v)


def _sort_key(v: FlatValue):
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, float):
        return (1, v)
    if isinstance(v, str):
        return (2, v)
    return (3, v.iri)


def standardize_list(vs: list[FlatValue], seq: list[Standardizer]) -> list[FlatValue]:
    """Apply list-level standardizers to a value list: setify (dedupe,
    keep first), sort (ascending, grouped by kind), take_first(k)."""
    out = list(vs)
    for st in seq:
        if st.name == "setify":
            seen = set()
            deduped = []
            for v in out:
                k = _dedupe_key(v)
                if k not in seen:
                    seen.add(k)
                    deduped.append(v)
            out = deduped
        elif st.name == "sort":
            out = sorted(out, key=_sort_key)
        elif st.name == "take_first":
            out = out[: st.param("k")]
    return out


@dataclass(frozen=True)
class StandardizationPlan:
    steps: tuple[tuple[str, tuple[Standardizer, ...]], ...] = ()

    @classmethod
    def build(
        cls,
        mapping: Mapping[str, list[Standardizer]],
        spec: MinimalDomainSpec | None = None,
    ) -> "StandardizationPlan":
        """Validate and freeze a path -> sequence mapping.

        Checks names and params against the catalog, that element-level
        entries precede list-level ones, the sequence-length cap, and
        (when a spec is given) that every path exists.
        """
        known = set(spec.fields) if spec is not None else None
        steps = []
        for path in sorted(mapping):
            seq = tuple(mapping[path])
            if known is not None and path not in known:
                raise PlanError(f"unknown path {path!r} in plan")
            if len(seq) > MAX_SEQUENCE_LENGTH:
                raise PlanError(f"sequence for {path!r} exceeds {MAX_SEQUENCE_LENGTH} entries")
            seen_list_level = False
            for st in seq:
                entry = validate_standardizer(st)
                if entry.level is Level.LIST:
                    seen_list_level = True
                elif seen_list_level:
                    raise PlanError(
                        f"element-level {st.name!r} after list-level standardizer on {path!r}"
                    )
            steps.append((path, seq))
        return cls(tuple(steps))

    def sequences(self) -> dict[str, tuple[Standardizer, ...]]:
        return dict(self.steps)

    def to_json(self) -> dict:
        return {path: [st.to_json() for st in seq] for path, seq in self.steps}

    @classmethod
    def from_json(cls, data: Mapping, spec: MinimalDomainSpec | None = None) -> "StandardizationPlan":
        mapping = {
            path: [Standardizer.from_json(d) for d in seq] for path, seq in data.items()
        }
        return cls.build(mapping, spec)


def split_levels(
    seq: tuple[Standardizer, ...]
) -> tuple[list[Standardizer], list[Standardizer]]:
    element = [st for st in seq if CATALOG[st.name].level is Level.ELEMENT]
    listlevel = [st for st in seq if CATALOG[st.name].level is Level.LIST]
    return element, listlevel


def apply_plan(doc: FlatDocument, plan: StandardizationPlan) -> FlatDocument:
    """Standardize a document. Paths not mentioned in the plan pass through;
    the input document is never mutated."""
    out = doc.copy()
    for path, seq in plan.steps:
        values = out.fields.get(path)
        if not values:
            continue
        element, listlevel = split_levels(seq)
        if element:
            values = [standardize_value(v, element) for v in values]
        if listlevel:
            values = standardize_list(values, listlevel)
        out.fields[path] = values
    return out


def default_plan(
    spec: MinimalDomainSpec, ignore: frozenset[str] = frozenset()
) -> StandardizationPlan:
    """Per-category default sequences: strings get lowercase/trim/collapse
    (plus setify when multi-valued), numbers get round(2), booleans none."""
    mapping: dict[str, list[Standardizer]] = {}
    for ps in spec.properties:
        if ps.field in ignore:
            continue
        if ps.category is DatatypeCategory.STRING:
            seq = [
                Standardizer.of("lowercase"),
                Standardizer.of("trim"),
                Standardizer.of("collapse_whitespace"),
            ]
            if ps.multi_valued:
                seq.append(Standardizer.of("setify"))
            mapping[ps.field] = seq
        elif ps.category is DatatypeCategory.NUMBER:
            mapping[ps.field] = [Standardizer.of("round", decimals=2)]
    return StandardizationPlan.build(mapping, spec)
