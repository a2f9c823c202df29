"""Flat document representation and embedded candidate-retrieval indices.

Instances are flattened into path-keyed documents (``address.postalCode``
style field names). A per-type index holds an inverted term index for text
and an ordered value index for numbers, and answers more-like-this queries:
given a sample document, find documents sharing at least a required
percentage of its terms.
"""
from __future__ import annotations

import json
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .errors import ConfigError
from .kg import Blank, Graph, Iri, Literal, instances_of_type, resolve_path
from .schema import DatatypeCategory, MinimalDomainSpec


@dataclass(frozen=True, slots=True)
class Ref:
    """Reference to a nested instance; its own values live under sub-paths."""

    iri: str


FlatValue = str | float | bool | Ref


def canonical_string(v: FlatValue) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_number(v)
    if isinstance(v, Ref):
        return v.iri
    return v


def format_number(x: float) -> str:
    """Canonical decimal string: no exponent, no trailing zeros."""
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    s = f"{x:.10f}".rstrip("0").rstrip(".")
    return s if s else "0"


@dataclass
class FlatDocument:
    id: str
    fields: dict[str, list[FlatValue]] = field(default_factory=dict)
    _sub_prefixes: set[str] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def copy(self) -> "FlatDocument":
        return FlatDocument(self.id, {k: list(v) for k, v in self.fields.items()})

    def has_subfields(self, path: str) -> bool:
        # cached: standardization rewrites values but never field keys
        if self._sub_prefixes is None:
            prefixes = set()
            for key, values in self.fields.items():
                if not values:
                    continue
                cut = key.find(".")
                while cut != -1:
                    prefixes.add(key[:cut])
                    cut = key.find(".", cut + 1)
            self._sub_prefixes = prefixes
        return path in self._sub_prefixes

    def subfields(self, path: str) -> dict[str, list[FlatValue]]:
        prefix = path + "."
        return {k: v for k, v in self.fields.items() if k.startswith(prefix) and v}

    def to_json(self) -> dict:
        def enc(v: FlatValue):
            return {"@id": v.iri} if isinstance(v, Ref) else v

        return {
            "id": self.id,
            "fields": {k: [enc(v) for v in self.fields[k]] for k in sorted(self.fields)},
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, data: dict) -> "FlatDocument":
        def dec(v):
            if isinstance(v, dict):
                return Ref(v["@id"])
            if isinstance(v, bool):
                return v
            if isinstance(v, (int, float)):
                return float(v)
            return v

        return cls(data["id"], {k: [dec(v) for v in vs] for k, vs in data["fields"].items()})


_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs, deduplicated keeping first occurrence."""
    return list(dict.fromkeys(_TOKEN.findall(text.lower())))


def _convert_literal(lit: Literal, category: DatatypeCategory) -> FlatValue:
    if category is DatatypeCategory.NUMBER:
        try:
            x = float(lit.lexical)
        except ValueError:
            return lit.lexical
        if x != x or x in (float("inf"), float("-inf")):
            return lit.lexical
        return x
    if category is DatatypeCategory.BOOLEAN:
        lex = lit.lexical.strip().lower()
        if lex in ("true", "1"):
            return True
        if lex in ("false", "0"):
            return False
        return lit.lexical
    return lit.lexical


def flatten(g: Graph, instance: str, spec: MinimalDomainSpec) -> FlatDocument:
    """Flatten one instance into a path-keyed document.

    Literals convert per the property category (falling back to text when a
    number fails to parse); resource values become Refs whose contents
    appear under the dotted sub-paths of the spec. Missing properties stay
    absent rather than empty.
    """
    doc = FlatDocument(instance)
    subject = Iri(instance)
    for ps in spec.properties:
        values: list[FlatValue] = []
        for term in resolve_path(g, subject, ps.path):
            if isinstance(term, Iri):
                values.append(Ref(term.value))
            elif isinstance(term, Blank):
                values.append(Ref("_:" + term.id))
            else:
                values.append(_convert_literal(term, ps.category))
        if not ps.multi_valued:
            values = values[:1]
        if values:
            doc.fields[ps.field] = values
    return doc


def value_terms(v: FlatValue) -> list[str]:
    """Index terms contributed by one value. Refs contribute none: their
    content is indexed under sub-paths."""
    if isinstance(v, bool):
        return ["true" if v else "false"]
    if isinstance(v, float):
        return [format_number(v)]
    if isinstance(v, Ref):
        return []
    return tokenize(v)


@dataclass(frozen=True)
class PreFilterConfig:
    properties: tuple[str, ...]
    threshold_pct: int

    def __post_init__(self):
        if not (0 <= self.threshold_pct <= 100):
            raise ConfigError(f"threshold_pct must be in [0,100], got {self.threshold_pct}")


class TypeIndex:
    """All flattened instances of one type plus retrieval structures.

    ``inverted`` maps (path, term) to a sorted posting list of ids;
    ``numeric`` keeps per-path sorted (value, id) lists for range lookups.
    Readers may share an index freely; rebuilding replaces the object.
    """

    def __init__(self, spec: MinimalDomainSpec):
        self.spec = spec
        self.docs: dict[str, FlatDocument] = {}
        self.inverted: dict[tuple[str, str], list[str]] = {}
        self.numeric: dict[str, list[tuple[float, str]]] = {}

    def __len__(self) -> int:
        return len(self.docs)

    def add_document(self, doc: FlatDocument) -> None:
        self.docs[doc.id] = doc
        for path, values in doc.fields.items():
            for v in values:
                for term in value_terms(v):
                    postings = self.inverted.setdefault((path, term), [])
                    # one doc is ingested at a time, so a repeat is always last
                    if not postings or postings[-1] != doc.id:
                        postings.append(doc.id)
                if isinstance(v, float) and not isinstance(v, bool):
                    self.numeric.setdefault(path, []).append((v, doc.id))

    def finish(self) -> None:
        for postings in self.inverted.values():
            postings.sort()
        for entries in self.numeric.values():
            entries.sort()

    def numeric_range(self, path: str, lo: float, hi: float) -> list[str]:
        """Ids of documents with a value in [lo, hi] on ``path``."""
        entries = self.numeric.get(path, [])
        start = bisect_left(entries, (lo, ""))
        end = bisect_right(entries, (hi, "￿"))
        return sorted({doc_id for _, doc_id in entries[start:end]})


def build_index(g: Graph, spec: MinimalDomainSpec) -> TypeIndex:
    """Flatten every instance of the spec's type and index it."""
    idx = TypeIndex(spec)
    for instance in instances_of_type(g, spec.type_iri):
        idx.add_document(flatten(g, instance, spec))
    idx.finish()
    return idx


def sample_terms(sample: FlatDocument, properties: tuple[str, ...]) -> list[str]:
    terms: dict[str, None] = {}
    for path in properties:
        for v in sample.fields.get(path, ()):
            for term in value_terms(v):
                terms.setdefault(term, None)
    return list(terms)


def more_like_this(
    target: TypeIndex,
    sample: FlatDocument,
    cfg: PreFilterConfig,
    limit: int | None = 50,
) -> list[tuple[str, int]]:
    """Find documents sharing enough of the sample's terms.

    The required count is ceil(threshold_pct% of the sample's distinct
    terms over the selected properties); a sample with no terms yields no
    candidates. Results are sorted by match count (desc) then id, truncated
    to ``limit``. The sample itself is suppressed when it is a document of
    the target index.
    """
    if not cfg.properties:
        raise ConfigError("pre-filter property selection must be non-empty")
    known = set(target.spec.fields)
    unknown = [p for p in cfg.properties if p not in known]
    if unknown:
        raise ConfigError(f"pre-filter properties not in index spec: {unknown}")

    terms = sample_terms(sample, cfg.properties)
    n = len(terms)
    if n == 0:
        return []
    required = -(-cfg.threshold_pct * n // 100)

    counts: dict[str, int] = {}
    for term in terms:
        matched: set[str] = set()
        for path in cfg.properties:
            matched.update(target.inverted.get((path, term), ()))
        for doc_id in matched:
            counts[doc_id] = counts.get(doc_id, 0) + 1

    self_id = sample.id if target.docs.get(sample.id) is sample else None
    if required == 0:
        qualified = [(i, counts.get(i, 0)) for i in target.docs if i != self_id]
    else:
        qualified = [
            (i, c) for i, c in counts.items() if c >= required and i != self_id
        ]
    qualified.sort(key=lambda pair: (-pair[1], pair[0]))
    if limit is not None:
        qualified = qualified[:limit]
    return qualified
