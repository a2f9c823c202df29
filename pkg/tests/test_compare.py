import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgdedup.compare import (
    Aggregation,
    Comparator,
    ComparisonConfig,
    DDConfig,
    DecisionConfig,
    PathRule,
    RunCache,
    ScoredPair,
    aggregate,
    compare_instances,
    compare_literal,
    compare_path,
    decide,
    levenshtein_distance,
    run_duplicate_detection,
    serialize_fields,
)
from kgdedup.errors import ConfigError
from kgdedup.index import FlatDocument, PreFilterConfig, Ref, build_index, flatten
from kgdedup.learn import default_config
from kgdedup.standardize import StandardizationPlan

from .conftest import E1234, E5678

C = Comparator.of


def oracle_levenshtein(a: str, b: str) -> int:
    """Naive full-matrix edit distance, kept independent of the engine."""
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return d[m][n]


def test_levenshtein_kitten_sitting():
    assert oracle_levenshtein("kitten", "sitting") == 3
    assert compare_literal("kitten", "sitting", C("levenshtein")) == pytest.approx(1 - 3 / 7)


@settings(max_examples=200)
@given(st.text(max_size=25), st.text(max_size=25))
def test_levenshtein_matches_oracle(a, b):
    assert levenshtein_distance(a, b) == oracle_levenshtein(a, b)


@settings(max_examples=100, deadline=None)
@given(
    st.text(alphabet="abc ", min_size=60, max_size=90),
    st.text(alphabet="abc ", min_size=60, max_size=90),
)
def test_levenshtein_matches_oracle_long_strings(a, b):
    # exercises the wide-pattern fallback path as well as the bit-parallel one
    assert levenshtein_distance(a, b) == oracle_levenshtein(a, b)


@pytest.mark.parametrize(
    "a,b,comp,expected",
    [
        ("", "", C("levenshtein"), 1.0),
        ("abc", "abc", C("levenshtein"), 1.0),
        ("abc", "", C("levenshtein"), 0.0),
        (2.0, 4.0, C("number_ratio"), 0.5),
        (0.0, 0.0, C("number_ratio"), 1.0),
        (0.0, 5.0, C("number_ratio"), 0.0),
        (-2.0, 2.0, C("number_ratio"), 0.0),
        (-2.0, -4.0, C("number_ratio"), 0.5),
        (True, True, C("boolean_eq"), 1.0),
        (True, False, C("boolean_eq"), 0.0),
        (1.0, 1.05, C("number_abs", tolerance=0.1), 1.0),
        (1.0, 1.2, C("number_abs", tolerance=0.1), 0.0),
        ("a b c", "b c d", C("jaccard_tokens"), 2 / 4),
        ("", "", C("jaccard_tokens"), 1.0),
        ("same", "same", C("exact"), 1.0),
        ("same", "Same", C("exact"), 0.0),
        (Ref("http://x/a"), Ref("http://x/a"), C("uri_eq"), 1.0),
        (Ref("http://x/a"), Ref("http://x/b"), C("uri_eq"), 0.0),
    ],
)
def test_comparator_table(a, b, comp, expected):
    assert compare_literal(a, b, comp) == pytest.approx(expected)


def test_mismatched_kinds_under_string_comparator_use_levenshtein():
    # number vs text degrades to canonical-string levenshtein
    assert compare_literal(3.14, "3.14", C("exact")) == 1.0
    assert compare_literal(42.0, "42", C("jaccard_tokens")) == 1.0
    assert compare_literal(True, "true", C("levenshtein")) == 1.0


def test_mismatched_kinds_under_typed_comparator_are_zero():
    assert compare_literal(3.14, "3.14", C("number_ratio")) == 0.0
    assert compare_literal(True, "true", C("boolean_eq")) == 0.0
    assert compare_literal(Ref("http://x/a"), "http://x/a", C("uri_eq")) == 0.0


def test_unknown_comparator_rejected():
    with pytest.raises(ConfigError):
        C("fuzzy_wuzzy")
    with pytest.raises(ConfigError):
        C("number_abs", tolerance=-1)


_any_value = st.one_of(
    st.text(max_size=15),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.booleans(),
    st.builds(Ref, st.from_regex(r"http://x/[a-z]{1,6}", fullmatch=True)),
)
_any_comparator = st.sampled_from(
    [
        C("levenshtein"),
        C("exact"),
        C("jaccard_tokens"),
        C("number_ratio"),
        C("number_abs", tolerance=0.5),
        C("boolean_eq"),
        C("uri_eq"),
    ]
)


@settings(max_examples=200)
@given(_any_value, _any_value, _any_comparator)
def test_comparators_symmetric_and_in_range(a, b, comp):
    s1 = compare_literal(a, b, comp)
    s2 = compare_literal(b, a, comp)
    assert s1 == s2
    assert 0.0 <= s1 <= 1.0


@settings(max_examples=200)
@given(_any_value, _any_comparator)
def test_comparators_identity(x, comp):
    typed_domains = {
        "number_ratio": float,
        "number_abs": float,
        "boolean_eq": bool,
        "uri_eq": Ref,
    }
    dom = typed_domains.get(comp.name)
    if dom is float and (isinstance(x, bool) or not isinstance(x, float)):
        return
    if dom is bool and not isinstance(x, bool):
        return
    if dom is Ref and not isinstance(x, Ref):
        return
    assert compare_literal(x, x, comp) == 1.0


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_aggregation_ordering(sims):
    mn = aggregate(sims, Aggregation.MIN)
    av = aggregate(sims, Aggregation.AVG)
    mx = aggregate(sims, Aggregation.MAX)
    assert mn <= av + 1e-12
    assert av <= mx + 1e-12


# -- serialize_fields -----------------------------------------------------------


def test_serialize_fields_sorted_keys(events_graph, event_spec):
    doc = flatten(events_graph, E1234, event_spec)
    assert serialize_fields(doc, "address") == "Berlin 10115 Musterstr. 1"


def test_serialize_fields_empty_and_single():
    doc = FlatDocument("d", {"address": ["plain"]})
    assert serialize_fields(doc, "address") == ""
    doc = FlatDocument("d", {"address.postalCode": ["10115"]})
    assert serialize_fields(doc, "address") == "10115"


# -- compare_path cases -----------------------------------------------------------


def _cfg(**rules) -> ComparisonConfig:
    return ComparisonConfig.build(rules)


def test_compare_path_multivalue_max():
    a = FlatDocument("a", {"name": ["summer music fest", "fest 2023"]})
    b = FlatDocument("b", {"name": ["summer music fest"]})
    cfg = _cfg(name=PathRule(C("levenshtein"), Aggregation.MAX))
    assert compare_path(a, b, "name", cfg) == 1.0


def test_compare_path_aggregations_differ():
    a = FlatDocument("a", {"name": ["aaaa", "bbbb"]})
    b = FlatDocument("b", {"name": ["aaaa"]})
    mx = compare_path(a, b, "name", _cfg(name=PathRule(C("levenshtein"), Aggregation.MAX)))
    av = compare_path(a, b, "name", _cfg(name=PathRule(C("levenshtein"), Aggregation.AVG)))
    mn = compare_path(a, b, "name", _cfg(name=PathRule(C("levenshtein"), Aggregation.MIN)))
    assert (mx, av, mn) == (1.0, 0.5, 0.0)


def test_compare_path_serialization_fallback(events_graph, event_spec):
    a = flatten(events_graph, E1234, event_spec)
    b = flatten(events_graph, E5678, event_spec)
    cfg = _cfg(address=PathRule(C("levenshtein"), Aggregation.MAX))
    # structured side serializes to exactly the literal on the other side
    assert compare_path(a, b, "address", cfg) == 1.0


def test_compare_path_both_structured_averages_common_subpaths():
    a = FlatDocument(
        "a",
        {
            "address": [Ref("_:x")],
            "address.postalCode": ["10115"],
            "address.city": ["Berlin"],
        },
    )
    b = FlatDocument(
        "b",
        {
            "address": [Ref("_:y")],
            "address.postalCode": ["10115"],
            "address.city": ["Hamburg"],
        },
    )
    cfg = _cfg(address=PathRule(C("levenshtein"), Aggregation.MAX))
    city_sim = compare_literal("Berlin", "Hamburg", C("levenshtein"))
    assert compare_path(a, b, "address", cfg) == pytest.approx((1.0 + city_sim) / 2)


def test_compare_path_both_structured_no_common_subpaths_serializes():
    a = FlatDocument("a", {"address": [Ref("_:x")], "address.postalCode": ["10115"]})
    b = FlatDocument("b", {"address": [Ref("_:y")], "address.city": ["10115"]})
    cfg = _cfg(address=PathRule(C("levenshtein"), Aggregation.MAX))
    assert compare_path(a, b, "address", cfg) == 1.0


def test_compare_path_absent_is_none():
    a = FlatDocument("a", {"name": ["x"]})
    b = FlatDocument("b", {})
    cfg = _cfg(name=PathRule(C("levenshtein"), Aggregation.MAX))
    assert compare_path(a, b, "name", cfg) is None


def test_compare_path_ref_without_subfields_is_none():
    a = FlatDocument("a", {"owner": [Ref("http://x/o1")]})
    b = FlatDocument("b", {"owner": ["alice"]})
    cfg = _cfg(owner=PathRule(C("levenshtein"), Aggregation.MAX))
    assert compare_path(a, b, "owner", cfg) is None


# -- compare_instances / decide ------------------------------------------------------


def test_weighted_average_equal_weights():
    a = FlatDocument("a", {"p1": ["x"], "p2": ["aaaaaaaaay"], "p3": ["z"]})
    b = FlatDocument("b", {"p1": ["x"], "p2": ["aaaaaaaaaa"], "p3": ["z"]})
    cfg = _cfg(
        p1=PathRule(C("levenshtein"), weight=1.0),
        p2=PathRule(C("levenshtein"), weight=1.0),
        p3=PathRule(C("levenshtein"), weight=1.0),
    )
    pair = compare_instances(a, b, cfg)
    assert pair.similarity == pytest.approx((1.0 + 0.9 + 1.0) / 3)


def test_zero_weight_excluded():
    a = FlatDocument("a", {"p1": ["same"], "p2": ["left"]})
    b = FlatDocument("b", {"p1": ["same"], "p2": ["completely-other"]})
    cfg = _cfg(
        p1=PathRule(C("levenshtein"), weight=0.5),
        p2=PathRule(C("levenshtein"), weight=0.0),
    )
    pair = compare_instances(a, b, cfg)
    assert pair.similarity == 1.0
    assert "p2" not in pair.per_path


def test_absent_path_renormalizes():
    a = FlatDocument("a", {"p1": ["abcdefghij"], "p2": ["same"]})
    b = FlatDocument("b", {"p1": ["abcdexxxxx"], "p2": ["same"], "p3": ["only-here"]})
    cfg = _cfg(
        p1=PathRule(C("levenshtein"), weight=1.0),
        p2=PathRule(C("levenshtein"), weight=1.0),
        p3=PathRule(C("levenshtein"), weight=1.0),
    )
    pair = compare_instances(a, b, cfg)
    assert pair.similarity == pytest.approx((0.5 + 1.0) / 2)
    assert set(pair.per_path) == {"p1", "p2"}


def test_nothing_comparable_scores_zero():
    a = FlatDocument("a", {"p1": ["x"]})
    b = FlatDocument("b", {"p2": ["y"]})
    cfg = _cfg(
        p1=PathRule(C("levenshtein"), weight=1.0),
        p2=PathRule(C("levenshtein"), weight=1.0),
    )
    assert compare_instances(a, b, cfg).similarity == 0.0


@settings(max_examples=200)
@given(
    sims=st.lists(st.floats(0, 1), min_size=1, max_size=8),
    weights=st.lists(st.sampled_from([0.25, 0.5, 0.75, 1.0]), min_size=1, max_size=8),
    k=st.sampled_from([0.25, 0.5, 0.75, 1.0]),
)
def test_weight_scaling_invariance(sims, weights, k):
    n = min(len(sims), len(weights))
    sims, weights = sims[:n], weights[:n]
    base = sum(w * s for w, s in zip(weights, sims)) / sum(weights)
    scaled = sum(k * w * s for w, s in zip(weights, sims)) / sum(k * w for w in weights)
    assert math.isclose(base, scaled, rel_tol=1e-9, abs_tol=1e-12)


def test_decide_strictly_above():
    d = DecisionConfig(0.75)
    assert decide(ScoredPair("a", "b", 0.80), d) is True
    assert decide(ScoredPair("a", "b", 0.75), d) is False
    assert decide(ScoredPair("a", "b", 0.0), DecisionConfig(0.0)) is False


def test_quantization_enforced():
    with pytest.raises(ConfigError):
        DecisionConfig(0.755)
    with pytest.raises(ConfigError):
        PathRule(C("levenshtein"), weight=0.005)
    DecisionConfig(0.75)
    PathRule(C("levenshtein"), weight=0.05)


def test_comparison_requires_positive_weight():
    with pytest.raises(ConfigError):
        ComparisonConfig.build({"p": PathRule(C("levenshtein"), weight=0.0)})


# -- full run -------------------------------------------------------------------


def test_run_running_example(events_graph, event_spec, event_index):
    cfg = default_config(event_spec, event_spec)
    results = run_duplicate_detection(event_index, event_index, cfg)
    assert len(results) == 1
    pair = results[0]
    assert (pair.source_id, pair.target_id) == (E1234, E5678)
    assert pair.accepted is True
    assert pair.per_path["name"] == 1.0
    assert pair.per_path["address"] == 1.0
    a = "annual music festival in berlin."
    b = "annual music festival in berlin"
    expected_desc = 1 - oracle_levenshtein(a, b) / max(len(a), len(b))
    assert expected_desc == 1 - 1 / 32
    assert pair.per_path["description"] == pytest.approx(expected_desc)
    assert "address.postalCode" not in pair.per_path
    assert pair.similarity == pytest.approx((1.0 + 1.0 + expected_desc) / 3)


def test_run_empty_source(event_spec):
    from kgdedup.kg import parse_ntriples

    empty = build_index(parse_ntriples(""), event_spec)
    cfg = default_config(event_spec, event_spec)
    assert run_duplicate_detection(empty, empty, cfg) == []


def test_run_threshold_monotone(events_graph, event_spec, event_index):
    base = default_config(event_spec, event_spec)
    lo = base.replace(decision=DecisionConfig(0.10))
    hi = base.replace(decision=DecisionConfig(0.99))
    accepted_lo = {p.key() for p in run_duplicate_detection(event_index, event_index, lo) if p.accepted}
    accepted_hi = {p.key() for p in run_duplicate_detection(event_index, event_index, hi) if p.accepted}
    assert accepted_hi <= accepted_lo


def test_run_with_cache_identical(events_graph, event_spec, event_index):
    cfg = default_config(event_spec, event_spec)
    plain = run_duplicate_detection(event_index, event_index, cfg)
    cache = RunCache()
    cached1 = run_duplicate_detection(event_index, event_index, cfg, cache=cache)
    cached2 = run_duplicate_detection(event_index, event_index, cfg, cache=cache)
    as_json = lambda rs: [p.to_json() for p in rs]
    assert as_json(cached1) == as_json(plain)
    assert as_json(cached2) == as_json(plain)


def test_run_validates_paths(event_index):
    cfg = DDConfig(
        pre_filter=PreFilterConfig(("bogus",), 40),
        plan=StandardizationPlan.build({}),
        comparison=_cfg(name=PathRule(C("levenshtein"))),
        decision=DecisionConfig(),
    )
    with pytest.raises(ConfigError):
        run_duplicate_detection(event_index, event_index, cfg)


def test_config_json_roundtrip(event_spec):
    cfg = default_config(event_spec, event_spec)
    again = DDConfig.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    assert again.config_hash() == cfg.config_hash()
