"""Pairwise similarity: value comparators, path comparison with range-case
handling, weighted instance similarity, the decision rule, and the full
detection run over a source/target index pair.

Range cases per property: two literal lists are compared element-by-element
and aggregated (max/avg/min); a structured value against a literal falls
back to serializing the structured side's sub-fields into one string; two
structured values compare sub-path by sub-path with equal weights. Missing
values are excluded (weights renormalized) instead of scoring zero.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Mapping

from .errors import ConfigError
from .index import (
    FlatDocument,
    FlatValue,
    PreFilterConfig,
    Ref,
    TypeIndex,
    canonical_string,
    more_like_this,
    tokenize,
)
from .schema import MinimalDomainSpec
from .standardize import StandardizationPlan, apply_plan

MAX_CROSS_ELEMENTS = 64


# --------------------------------------------------------------------------
# Value comparators
# --------------------------------------------------------------------------


def _myers_distance(a: str, b: str) -> int:
    """Bit-parallel edit distance (Myers 1999); arbitrary-precision ints
    let the pattern exceed the usual word-size limit."""
    m = len(a)
    mask = (1 << m) - 1
    msb = 1 << (m - 1)
    peq: dict[str, int] = {}
    bit = 1
    for c in a:
        peq[c] = peq.get(c, 0) | bit
        bit <<= 1
    pv = mask
    mv = 0
    score = m
    get = peq.get
    for c in b:
        eq = get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        if ph & msb:
            score += 1
        elif mh & msb:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        pv = ((mh << 1) | (~(xv | ph) & mask)) & mask
        mv = ph & xv
    return score


@lru_cache(maxsize=1 << 18)
def levenshtein_distance(a: str, b: str) -> int:
    if a == b:
        return 0
    # shared affixes never change the distance; near-duplicates share a lot
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) > len(b):
        a, b = b, a
    return _myers_distance(a, b)


def levenshtein_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein_distance(a, b) / max(len(a), len(b))


def jaccard_tokens_similarity(a: str, b: str) -> float:
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


def number_ratio(a: float, b: float) -> float:
    if a == b:
        return 1.0
    if a == 0 or b == 0 or (a < 0) != (b < 0):
        return 0.0
    aa, ab = abs(a), abs(b)
    return min(aa, ab) / max(aa, ab)


STRING_COMPARATORS = {"levenshtein", "exact", "jaccard_tokens"}
COMPARATOR_NAMES = STRING_COMPARATORS | {"number_ratio", "number_abs", "boolean_eq", "uri_eq"}


@dataclass(frozen=True)
class Comparator:
    name: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.name not in COMPARATOR_NAMES:
            raise ConfigError(f"unknown comparator {self.name!r}")
        p = dict(self.params)
        if self.name == "number_abs":
            tol = p.get("tolerance")
            if not isinstance(tol, (int, float)) or tol < 0:
                raise ConfigError("number_abs requires param tolerance >= 0")
        elif p:
            raise ConfigError(f"{self.name} takes no params")

    @classmethod
    def of(cls, name: str, **params) -> "Comparator":
        return cls(name, tuple(sorted(params.items())))

    def to_json(self) -> dict:
        out: dict = {"name": self.name}
        if self.params:
            out["params"] = dict(self.params)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Comparator":
        return cls.of(data["name"], **data.get("params", {}))


def _kind(v: FlatValue) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, float):
        return "number"
    if isinstance(v, Ref):
        return "ref"
    return "text"


def compare_literal(a: FlatValue, b: FlatValue, c: Comparator) -> float:
    """Similarity of two values in [0,1] under comparator ``c``.

    String comparators work on canonical string forms, so any two values
    are comparable; kind mismatches under a string comparator degrade to a
    levenshtein comparison of canonical strings, and to 0 under typed
    comparators.
    """
    ka, kb = _kind(a), _kind(b)
    if c.name in STRING_COMPARATORS:
        sa, sb = canonical_string(a), canonical_string(b)
        if ka != kb:
            return levenshtein_similarity(sa, sb)
        if c.name == "levenshtein":
            return levenshtein_similarity(sa, sb)
        if c.name == "exact":
            return 1.0 if sa == sb else 0.0
        return jaccard_tokens_similarity(sa, sb)
    if c.name == "number_ratio":
        if ka != "number" or kb != "number":
            return 0.0
        return number_ratio(a, b)
    if c.name == "number_abs":
        if ka != "number" or kb != "number":
            return 0.0
        return 1.0 if abs(a - b) <= dict(c.params)["tolerance"] else 0.0
    if c.name == "boolean_eq":
        if ka != "bool" or kb != "bool":
            return 0.0
        return 1.0 if a == b else 0.0
    # uri_eq
    if ka != "ref" or kb != "ref":
        return 0.0
    return 1.0 if a.iri == b.iri else 0.0


class Aggregation(Enum):
    MAX = "max"
    AVG = "avg"
    MIN = "min"


def aggregate(sims: list[float], agg: Aggregation) -> float:
    if agg is Aggregation.MAX:
        return max(sims)
    if agg is Aggregation.MIN:
        return min(sims)
    return sum(sims) / len(sims)


# --------------------------------------------------------------------------
# Comparison configuration
# --------------------------------------------------------------------------


def quantized2(x: float, what: str) -> float:
    """Validate two-decimal quantization and return the exact hundredth."""
    scaled = x * 100
    nearest = round(scaled)
    if abs(scaled - nearest) > 1e-6:
        raise ConfigError(f"{what} must have at most two decimals, got {x}")
    return nearest / 100


@dataclass(frozen=True)
class PathRule:
    comparator: Comparator
    aggregation: Aggregation = Aggregation.MAX
    weight: float = 1.0

    def __post_init__(self):
        w = quantized2(self.weight, "weight")
        if not (0.0 <= w <= 1.0):
            raise ConfigError(f"weight must be in [0,1], got {self.weight}")
        object.__setattr__(self, "weight", w)

    def with_weight(self, w: float) -> "PathRule":
        return PathRule(self.comparator, self.aggregation, w)


@dataclass(frozen=True)
class ComparisonConfig:
    rules: tuple[tuple[str, PathRule], ...]

    @classmethod
    def build(cls, mapping: Mapping[str, PathRule]) -> "ComparisonConfig":
        if not any(rule.weight > 0 for rule in mapping.values()):
            raise ConfigError("at least one path must have weight > 0")
        return cls(tuple(sorted(mapping.items())))

    @cached_property
    def _rules_dict(self) -> dict[str, PathRule]:
        return dict(self.rules)

    def as_dict(self) -> dict[str, PathRule]:
        return dict(self.rules)

    def with_weights(self, weights: Mapping[str, float]) -> "ComparisonConfig":
        return ComparisonConfig.build(
            {
                path: rule.with_weight(weights.get(path, rule.weight))
                for path, rule in self.rules
            }
        )

    def to_json(self) -> dict:
        return {
            path: {
                "comparator": rule.comparator.to_json(),
                "aggregation": rule.aggregation.value,
                "weight": rule.weight,
            }
            for path, rule in self.rules
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ComparisonConfig":
        return cls.build(
            {
                path: PathRule(
                    comparator=Comparator.from_json(entry["comparator"]),
                    aggregation=Aggregation(entry["aggregation"]),
                    weight=entry["weight"],
                )
                for path, entry in data.items()
            }
        )


@dataclass(frozen=True)
class DecisionConfig:
    threshold: float = 0.75

    def __post_init__(self):
        t = quantized2(self.threshold, "decision threshold")
        if not (0.0 <= t <= 1.0):
            raise ConfigError(f"decision threshold must be in [0,1], got {self.threshold}")
        object.__setattr__(self, "threshold", t)


@dataclass(frozen=True)
class DDConfig:
    pre_filter: PreFilterConfig
    plan: StandardizationPlan
    comparison: ComparisonConfig
    decision: DecisionConfig

    def to_json(self) -> dict:
        return {
            "pre_filter": {
                "properties": list(self.pre_filter.properties),
                "threshold_pct": self.pre_filter.threshold_pct,
            },
            "plan": self.plan.to_json(),
            "comparison": self.comparison.to_json(),
            "decision": {"threshold": self.decision.threshold},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DDConfig":
        return cls(
            pre_filter=PreFilterConfig(
                properties=tuple(data["pre_filter"]["properties"]),
                threshold_pct=int(data["pre_filter"]["threshold_pct"]),
            ),
            plan=StandardizationPlan.from_json(data["plan"]),
            comparison=ComparisonConfig.from_json(data["comparison"]),
            decision=DecisionConfig(threshold=data["decision"]["threshold"]),
        )

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **kwargs) -> "DDConfig":
        parts = {
            "pre_filter": self.pre_filter,
            "plan": self.plan,
            "comparison": self.comparison,
            "decision": self.decision,
        }
        parts.update(kwargs)
        return DDConfig(**parts)


def validate_config(cfg: DDConfig, source_spec: MinimalDomainSpec, target_spec: MinimalDomainSpec) -> None:
    """Check every path reference against both index specs."""
    known = set(source_spec.fields) & set(target_spec.fields)
    for path in cfg.pre_filter.properties:
        if path not in known:
            raise ConfigError(f"pre-filter path {path!r} not in both index specs")
    if not cfg.pre_filter.properties:
        raise ConfigError("pre-filter property selection must be non-empty")
    for path, _ in cfg.comparison.rules:
        if path not in known:
            raise ConfigError(f"comparison path {path!r} not in both index specs")
    for path, _ in cfg.plan.steps:
        if path not in known:
            raise ConfigError(f"plan path {path!r} not in both index specs")


# --------------------------------------------------------------------------
# Path and instance comparison
# --------------------------------------------------------------------------


def serialize_fields(doc: FlatDocument, prefix: str) -> str:
    """All values strictly under ``prefix.``, keys sorted, joined by spaces."""
    sub = doc.subfields(prefix)
    parts = []
    for key in sorted(sub):
        parts.extend(canonical_string(v) for v in sub[key])
    return " ".join(parts)


def _string_candidates(doc: FlatDocument, path: str) -> list[FlatValue]:
    """Values a side contributes to a string-fallback comparison: its
    literal values plus, when sub-fields exist, their serialization."""
    values = [v for v in doc.fields.get(path, ()) if not isinstance(v, Ref)]
    if doc.has_subfields(path):
        values.append(serialize_fields(doc, path))
    return values


def _cross_similarity(
    va: list[FlatValue], vb: list[FlatValue], comparator: Comparator, agg: Aggregation
) -> float:
    va = va[:MAX_CROSS_ELEMENTS]
    vb = vb[:MAX_CROSS_ELEMENTS]
    sims = [compare_literal(a, b, comparator) for a in va for b in vb]
    return aggregate(sims, agg)


def compare_path(
    doc_a: FlatDocument,
    doc_b: FlatDocument,
    path: str,
    comparison: ComparisonConfig,
) -> float | None:
    """Similarity of one property path between two documents, or None when
    either side has nothing comparable there (missing-value rule)."""
    rules = comparison._rules_dict
    rule = rules[path]
    a_structured = doc_a.has_subfields(path)
    b_structured = doc_b.has_subfields(path)

    if a_structured and b_structured:
        common = sorted(set(doc_a.subfields(path)) & set(doc_b.subfields(path)))
        sims = []
        for sub in common:
            sub_rule = rules.get(sub)
            sub_comp = sub_rule.comparator if sub_rule else Comparator.of("levenshtein")
            sub_agg = sub_rule.aggregation if sub_rule else Aggregation.MAX
            sims.append(
                _cross_similarity(doc_a.fields[sub], doc_b.fields[sub], sub_comp, sub_agg)
            )
        if sims:
            return sum(sims) / len(sims)
        # no shared sub-paths: fall through to the serialized comparison

    ca = _string_candidates(doc_a, path)
    cb = _string_candidates(doc_b, path)
    if not ca or not cb:
        return None
    return _cross_similarity(ca, cb, rule.comparator, rule.aggregation)


@dataclass
class ScoredPair:
    source_id: str
    target_id: str
    similarity: float
    per_path: dict[str, float] = field(default_factory=dict)
    accepted: bool = False

    def key(self) -> tuple[str, str]:
        return (self.source_id, self.target_id) if self.source_id <= self.target_id else (
            self.target_id,
            self.source_id,
        )

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "target_id": self.target_id,
            "similarity": self.similarity,
            "per_path": {k: self.per_path[k] for k in sorted(self.per_path)},
            "accepted": self.accepted,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScoredPair":
        return cls(
            source_id=data["source_id"],
            target_id=data["target_id"],
            similarity=data["similarity"],
            per_path=dict(data["per_path"]),
            accepted=data["accepted"],
        )


def compare_instances(
    doc_a: FlatDocument, doc_b: FlatDocument, comparison: ComparisonConfig
) -> ScoredPair:
    """Weighted average similarity over the configured paths.

    Paths absent on either side are excluded and the weights renormalize
    over what is present; zero-weight paths are not evaluated. No weighted
    path present on both sides scores 0.
    """
    per_path: dict[str, float] = {}
    weighted_sum = 0.0
    weight_total = 0.0
    for path, rule in comparison.rules:
        if rule.weight <= 0:
            continue
        sim = compare_path(doc_a, doc_b, path, comparison)
        if sim is None:
            continue
        per_path[path] = sim
        weighted_sum += rule.weight * sim
        weight_total += rule.weight
    similarity = weighted_sum / weight_total if weight_total > 0 else 0.0
    return ScoredPair(doc_a.id, doc_b.id, similarity, per_path)


def decide(pair: ScoredPair, decision: DecisionConfig) -> bool:
    """Accept strictly above the threshold."""
    return pair.similarity > decision.threshold


# --------------------------------------------------------------------------
# Full detection run
# --------------------------------------------------------------------------


class RunCache:
    """Memo for repeated runs over the same indices (heuristic search).

    Caches standardized documents per plan, candidate lists per pre-filter
    setting, and per-path similarities per comparator/aggregation/plan.
    All cached values are pure functions of their keys, so cached and
    uncached runs produce identical results.
    """

    def __init__(self):
        self._refs: list = []
        self.std: dict = {}
        self.mlt: dict = {}
        self.sims: dict = {}
        self._plan_keys: dict[StandardizationPlan, str] = {}

    def pin(self, obj) -> int:
        # hold a reference so id() stays unique for the cache lifetime
        self._refs.append(obj)
        return id(obj)

    def plan_key(self, plan: StandardizationPlan) -> str:
        key = self._plan_keys.get(plan)
        if key is None:
            key = json.dumps(plan.to_json(), sort_keys=True)
            self._plan_keys[plan] = key
        return key


def _std_docs(
    index: TypeIndex, plan: StandardizationPlan, cache: RunCache | None
) -> dict[str, FlatDocument]:
    if cache is None:
        return {i: apply_plan(d, plan) for i, d in index.docs.items()}
    key = (cache.pin(index), cache.plan_key(plan))
    docs = cache.std.get(key)
    if docs is None:
        docs = {i: apply_plan(d, plan) for i, d in index.docs.items()}
        cache.std[key] = docs
    return docs


def _candidates(
    target: TypeIndex,
    sample: FlatDocument,
    pre: PreFilterConfig,
    limit: int | None,
    cache: RunCache | None,
) -> list[tuple[str, int]]:
    if cache is None:
        return more_like_this(target, sample, pre, limit)
    key = (cache.pin(target), pre.properties, pre.threshold_pct, limit, sample.id)
    got = cache.mlt.get(key)
    if got is None:
        got = more_like_this(target, sample, pre, limit)
        cache.mlt[key] = got
    return got


def run_duplicate_detection(
    source: TypeIndex,
    target: TypeIndex,
    cfg: DDConfig,
    candidate_limit: int | None = 50,
    cache: RunCache | None = None,
) -> list[ScoredPair]:
    """Score every (source instance, candidate) pair and flag acceptance.

    Candidates come from the pre-filter; both sides are standardized per
    the plan before comparison. For a self-join (source is target) each
    unordered pair is scored once, reported as (lexicographically smaller
    id, larger id). Output is sorted by similarity (desc) then ids, so
    runs are deterministic.
    """
    validate_config(cfg, source.spec, target.spec)
    self_join = source is target
    std_source = _std_docs(source, cfg.plan, cache)
    std_target = std_source if self_join else _std_docs(target, cfg.plan, cache)

    plan_key = cache.plan_key(cfg.plan) if cache is not None else None
    rule_keys: dict[str, tuple] = {}
    if cache is not None:
        bare = {
            path: (rule.comparator.name, rule.comparator.params, rule.aggregation.value)
            for path, rule in cfg.comparison.rules
        }
        for path in bare:
            # a path's similarity also depends on its sub-paths' rules
            # (used by the structured-to-structured case)
            subs = tuple(
                (p, bare[p]) for p in sorted(bare) if p.startswith(path + ".")
            )
            rule_keys[path] = (bare[path], subs)
    src_key = cache.pin(source) if cache is not None else None
    tgt_key = cache.pin(target) if cache is not None else None

    results: dict[tuple[str, str], ScoredPair] = {}
    for sid in sorted(source.docs):
        sample = source.docs[sid]
        for tid, _count in _candidates(target, sample, cfg.pre_filter, candidate_limit, cache):
            if self_join:
                pair_key = (sid, tid) if sid <= tid else (tid, sid)
            else:
                pair_key = (sid, tid)
            if pair_key in results:
                continue
            doc_a = std_source[pair_key[0]] if self_join else std_source[sid]
            doc_b = std_target[pair_key[1]] if self_join else std_target[tid]

            if cache is None:
                pair = compare_instances(doc_a, doc_b, cfg.comparison)
            else:
                per_path: dict[str, float] = {}
                weighted_sum = 0.0
                weight_total = 0.0
                for path, rule in cfg.comparison.rules:
                    if rule.weight <= 0:
                        continue
                    sim_key = (
                        src_key, tgt_key, plan_key, pair_key[0], pair_key[1],
                        path, rule_keys[path],
                    )
                    if sim_key in cache.sims:
                        sim = cache.sims[sim_key]
                    else:
                        sim = compare_path(doc_a, doc_b, path, cfg.comparison)
                        cache.sims[sim_key] = sim
                    if sim is None:
                        continue
                    per_path[path] = sim
                    weighted_sum += rule.weight * sim
                    weight_total += rule.weight
                similarity = weighted_sum / weight_total if weight_total > 0 else 0.0
                pair = ScoredPair(pair_key[0], pair_key[1], similarity, per_path)

            pair.accepted = decide(pair, cfg.decision)
            results[pair_key] = pair

    ordered = sorted(results.values(), key=lambda p: (-p.similarity, p.source_id, p.target_id))
    return ordered
