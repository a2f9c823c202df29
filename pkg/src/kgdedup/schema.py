"""Domain specification extraction: SHACL-style shapes or emergent inference.

Both routes produce the same :class:`MinimalDomainSpec`, which drives index
layout and every generated default configuration.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

from .errors import SpecError
from .kg import RDF_TYPE, XSD_NS, Blank, Graph, Iri, Literal, Term, instances_of_type, local_name

logger = logging.getLogger(__name__)

SH_NS = "http://www.w3.org/ns/shacl#"
SH_TARGET_CLASS = SH_NS + "targetClass"
SH_PROPERTY = SH_NS + "property"
SH_PATH = SH_NS + "path"
SH_DATATYPE = SH_NS + "datatype"
SH_NODE = SH_NS + "node"
SH_CLASS = SH_NS + "class"
SH_MAX_COUNT = SH_NS + "maxCount"

RDF_LANG_STRING = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString"


class DatatypeCategory(Enum):
    STRING = "string"
    NUMBER = "number"
    BOOLEAN = "boolean"


DEFAULT_CATEGORY_TABLE: dict[str, DatatypeCategory] = {
    XSD_NS + "string": DatatypeCategory.STRING,
    XSD_NS + "anyURI": DatatypeCategory.STRING,
    XSD_NS + "date": DatatypeCategory.STRING,
    XSD_NS + "dateTime": DatatypeCategory.STRING,
    XSD_NS + "time": DatatypeCategory.STRING,
    XSD_NS + "duration": DatatypeCategory.STRING,
    RDF_LANG_STRING: DatatypeCategory.STRING,
    XSD_NS + "integer": DatatypeCategory.NUMBER,
    XSD_NS + "int": DatatypeCategory.NUMBER,
    XSD_NS + "long": DatatypeCategory.NUMBER,
    XSD_NS + "short": DatatypeCategory.NUMBER,
    XSD_NS + "decimal": DatatypeCategory.NUMBER,
    XSD_NS + "float": DatatypeCategory.NUMBER,
    XSD_NS + "double": DatatypeCategory.NUMBER,
    XSD_NS + "nonNegativeInteger": DatatypeCategory.NUMBER,
    XSD_NS + "boolean": DatatypeCategory.BOOLEAN,
}


def categorize_datatype(
    dt: str, extra: Mapping[str, DatatypeCategory] | None = None
) -> DatatypeCategory:
    """Map a datatype IRI onto a category. Unknown IRIs fall back to STRING.

    ``extra`` extends (and may override) the built-in table.
    """
    if extra and dt in extra:
        return extra[dt]
    got = DEFAULT_CATEGORY_TABLE.get(dt)
    if got is None:
        logger.warning("unknown datatype %s, treating as string", dt)
        return DatatypeCategory.STRING
    return got


def load_category_table(path: str | Path) -> dict[str, DatatypeCategory]:
    """Load a category extension table from a JSON file of IRI -> category name."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    table = {}
    for iri, name in raw.items():
        try:
            table[iri] = DatatypeCategory(name)
        except ValueError as exc:
            raise SpecError(f"unknown category {name!r} for {iri}") from exc
    return table


@dataclass(frozen=True)
class PropertySpec:
    path: tuple[str, ...]
    field: str
    multi_valued: bool
    category: DatatypeCategory
    is_nested_instance: bool = False


@dataclass(frozen=True)
class MinimalDomainSpec:
    type_iri: str
    properties: tuple[PropertySpec, ...]
    depth: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise SpecError("depth must be >= 1")
        seen_paths = set()
        for ps in self.properties:
            if ps.path in seen_paths:
                raise SpecError(f"duplicate property path {ps.path}")
            seen_paths.add(ps.path)
            if len(ps.path) > self.depth + 1:
                raise SpecError(f"path {ps.path} exceeds depth {self.depth}")

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(ps.field for ps in self.properties)

    def by_field(self, name: str) -> PropertySpec | None:
        for ps in self.properties:
            if ps.field == name:
                return ps
        return None

    def to_json(self) -> dict:
        return {
            "type_iri": self.type_iri,
            "depth": self.depth,
            "properties": [
                {
                    "path": list(ps.path),
                    "field": ps.field,
                    "multi_valued": ps.multi_valued,
                    "category": ps.category.value,
                    "nested": ps.is_nested_instance,
                }
                for ps in self.properties
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MinimalDomainSpec":
        props = tuple(
            PropertySpec(
                path=tuple(p["path"]),
                field=p["field"],
                multi_valued=p["multi_valued"],
                category=DatatypeCategory(p["category"]),
                is_nested_instance=p["nested"],
            )
            for p in data["properties"]
        )
        return cls(type_iri=data["type_iri"], properties=props, depth=data["depth"])


def _assign_field_names(entries: list[dict]) -> tuple[PropertySpec, ...]:
    """Turn raw property entries into PropertySpecs with unique dotted names.

    A child path's name builds on the (possibly disambiguated) parent name,
    so sub-fields always group under their parent's prefix. Name collisions
    get a numeric suffix.
    """
    names: dict[tuple[str, ...], str] = {}
    used: set[str] = set()
    specs = []
    for e in entries:
        path = e["path"]
        parent = names.get(path[:-1])
        base = (parent + "." if parent else "") + local_name(path[-1])
        name = base
        n = 2
        while name in used:
            name = f"{base}{n}"
            n += 1
        used.add(name)
        names[path] = name
        specs.append(
            PropertySpec(
                path=path,
                field=name,
                multi_valued=e["multi"],
                category=e["category"],
                is_nested_instance=e["nested"],
            )
        )
    return tuple(specs)


# --------------------------------------------------------------------------
# SHACL-style extraction
# --------------------------------------------------------------------------


def _literal_int(term: Term) -> int | None:
    if isinstance(term, Literal):
        try:
            return int(term.lexical)
        except ValueError:
            return None
    return None


def _shape_for_class(g: Graph, class_iri: str) -> Iri | Blank | None:
    for t in g:
        if t.predicate.value == SH_TARGET_CLASS and t.object == Iri(class_iri):
            return t.subject
    return None


def _collect_shape(
    g: Graph,
    shape: Iri | Blank,
    prefix: tuple[str, ...],
    depth: int,
    extra: Mapping[str, DatatypeCategory] | None,
    entries: list[dict],
    seen_shapes: tuple,
) -> None:
    prop_entries = []
    for prop in g.objects(shape, SH_PROPERTY):
        if not isinstance(prop, (Iri, Blank)):
            continue
        paths = [o for o in g.objects(prop, SH_PATH) if isinstance(o, Iri)]
        if not paths:
            continue
        prop_entries.append((paths[0].value, prop))
    prop_entries.sort(key=lambda pair: pair[0])

    seen_paths = set()
    for pred, prop in prop_entries:
        path = prefix + (pred,)
        if path in seen_paths:
            continue
        seen_paths.add(path)
        max_count = None
        for o in g.objects(prop, SH_MAX_COUNT):
            max_count = _literal_int(o)
        multi = max_count is None or max_count > 1

        nested_shape: Iri | Blank | None = None
        for o in g.objects(prop, SH_NODE):
            if isinstance(o, (Iri, Blank)):
                nested_shape = o
        if nested_shape is None:
            for o in g.objects(prop, SH_CLASS):
                if isinstance(o, Iri):
                    nested_shape = _shape_for_class(g, o.value)

        datatypes = [o.value for o in g.objects(prop, SH_DATATYPE) if isinstance(o, Iri)]
        nested = nested_shape is not None
        category = (
            DatatypeCategory.STRING if nested or not datatypes
            else categorize_datatype(datatypes[0], extra)
        )
        entries.append({"path": path, "multi": multi, "category": category, "nested": nested})
        if nested and len(path) <= depth and nested_shape not in seen_shapes:
            _collect_shape(g, nested_shape, path, depth, extra, entries, seen_shapes + (shape,))


def extract_domain_spec(
    spec_graph: Graph,
    shape_iri: str,
    depth: int = 1,
    extra_categories: Mapping[str, DatatypeCategory] | None = None,
) -> MinimalDomainSpec:
    """Build a MinimalDomainSpec from a SHACL-style shape.

    Recognized constraints: sh:targetClass, sh:property, sh:path,
    sh:datatype, sh:node, sh:class, sh:maxCount. Everything else is
    ignored. Nested shapes expand into dotted sub-paths up to ``depth``.
    """
    if depth < 1:
        raise SpecError("depth must be >= 1")
    shape = Iri(shape_iri)
    targets = [o for o in spec_graph.objects(shape, SH_TARGET_CLASS) if isinstance(o, Iri)]
    if not targets:
        raise SpecError(f"shape {shape_iri} has no sh:targetClass")
    entries: list[dict] = []
    _collect_shape(spec_graph, shape, (), depth, extra_categories, entries, ())
    return MinimalDomainSpec(
        type_iri=targets[0].value, properties=_assign_field_names(entries), depth=depth
    )


# --------------------------------------------------------------------------
# Emergent schema inference
# --------------------------------------------------------------------------


def _infer_level(
    g: Graph,
    nodes: list[Iri | Blank],
    prefix: tuple[str, ...],
    depth: int,
    extra: Mapping[str, DatatypeCategory] | None,
    entries: list[dict],
) -> None:
    per_pred: dict[str, list[list[Term]]] = {}
    for node in nodes:
        by_pred: dict[str, list[Term]] = {}
        for t in g.outgoing(node):
            pred = t.predicate.value
            if pred == RDF_TYPE:
                continue
            by_pred.setdefault(pred, []).append(t.object)
        for pred, objs in by_pred.items():
            per_pred.setdefault(pred, []).append(objs)

    for pred in sorted(per_pred):
        value_lists = per_pred[pred]
        all_objects = [o for objs in value_lists for o in objs]
        multi = any(len(objs) >= 2 for objs in value_lists)
        resources = [o for o in all_objects if isinstance(o, (Iri, Blank))]
        nested = 2 * len(resources) >= len(all_objects)

        dt_counts: dict[str, int] = {}
        for o in all_objects:
            if isinstance(o, Literal):
                dt_counts[o.datatype] = dt_counts.get(o.datatype, 0) + 1
        if dt_counts:
            top = max(dt_counts.values())
            winners = [dt for dt, c in dt_counts.items() if c == top]
            category = (
                categorize_datatype(winners[0], extra)
                if len(winners) == 1
                else DatatypeCategory.STRING
            )
        else:
            category = DatatypeCategory.STRING

        path = prefix + (pred,)
        entries.append({"path": path, "multi": multi, "category": category, "nested": nested})

        if nested and len(path) <= depth:
            children: list[Iri | Blank] = []
            seen = set()
            for o in resources:
                if o not in seen and g.has_outgoing(o):
                    seen.add(o)
                    children.append(o)
            if children:
                _infer_level(g, children, path, depth, extra, entries)


def infer_emergent_schema(
    g: Graph,
    type_iri: str,
    depth: int = 1,
    extra_categories: Mapping[str, DatatypeCategory] | None = None,
) -> MinimalDomainSpec:
    """Infer a MinimalDomainSpec by scanning all instances of a type.

    A predicate becomes a property if any instance uses it; it is
    multi-valued if any single node carries two or more values for it. The
    category follows the most frequent observed literal datatype (ties fall
    back to STRING). Predicates whose objects are mostly resources count as
    nested instances and recurse up to ``depth``; rdf:type is structural
    and never becomes a property.
    """
    if depth < 1:
        raise SpecError("depth must be >= 1")
    roots = instances_of_type(g, type_iri)
    if not roots:
        raise SpecError(f"no instances of {type_iri}")
    entries: list[dict] = []
    _infer_level(g, [Iri(r) for r in roots], (), depth, extra_categories, entries)
    return MinimalDomainSpec(
        type_iri=type_iri, properties=_assign_field_names(entries), depth=depth
    )
