"""Active learning over the detection configuration: label store, result
analysis (precision/recall/F1 with a primary/secondary preference), and
search heuristics that mutate the configuration between labelling rounds.

Every heuristic evaluation is a full detection run followed by analysis
against the training labels, and is recorded in an audit log.
"""
from __future__ import annotations

import json
import os
import random
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import chain, combinations
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .compare import (
    Aggregation,
    Comparator,
    ComparisonConfig,
    DDConfig,
    DecisionConfig,
    PathRule,
    RunCache,
    ScoredPair,
    run_duplicate_detection,
)
from .errors import ConfigError, SpaceTooLarge, SpecError, StoreError, StrategyError
from .index import PreFilterConfig, TypeIndex
from .schema import DatatypeCategory, MinimalDomainSpec
from .standardize import (
    MAX_SEQUENCE_LENGTH,
    StandardizationPlan,
    Standardizer,
    default_plan,
)

DEFAULT_IGNORED_FIELDS = frozenset({"compliesWith"})
DEFAULT_PREFILTER_PCT = 40
DEFAULT_THRESHOLD = 0.75
BOOTSTRAP_THRESHOLD = 0.30


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


# --------------------------------------------------------------------------
# Labels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelRecord:
    source_id: str
    target_id: str
    is_duplicate: bool
    labelled_at: str

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "target_id": self.target_id,
            "is_duplicate": self.is_duplicate,
            "labelled_at": self.labelled_at,
        }


class LabelStore:
    """Training labels keyed by unordered instance pair.

    Optionally file-backed: every write is appended to a JSON-lines file
    and flushed before returning; loading replays the file with
    last-write-wins semantics.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple[str, str], LabelRecord] = {}
        if self.path is not None and self.path.exists():
            self._replay(self.path)

    def _replay(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    data = json.loads(line)
                    rec = LabelRecord(
                        data["source_id"], data["target_id"],
                        bool(data["is_duplicate"]), data["labelled_at"],
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise StoreError(f"{path}:{lineno}: corrupt label record: {exc}") from exc
                self._records[pair_key(rec.source_id, rec.target_id)] = rec

    def record(self, source_id: str, target_id: str, is_duplicate: bool) -> LabelRecord:
        if not source_id or not target_id:
            raise StoreError("label ids must be non-empty")
        rec = LabelRecord(
            source_id, target_id, is_duplicate,
            datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        if self.path is not None:
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"cannot persist label to {self.path}: {exc}") from exc
        self._records[pair_key(source_id, target_id)] = rec
        return rec

    def get(self, source_id: str, target_id: str) -> LabelRecord | None:
        return self._records.get(pair_key(source_id, target_id))

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return pair_key(*key) in self._records

    def records(self) -> list[LabelRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def snapshot(self) -> "LabelStore":
        """Detached in-memory copy; strategies evaluate against a frozen set."""
        clone = LabelStore()
        clone._records = dict(self._records)
        return clone

    def compact(self) -> None:
        """Rewrite the backing file as one sorted record per pair."""
        if self.path is None:
            return
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
        os.replace(tmp, self.path)


# --------------------------------------------------------------------------
# Result analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int
    precision: float
    recall: float
    f1: float
    labelled_total: int
    degenerate: bool

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int, labelled_total: int) -> "MetricsReport":
        precision = tp / (tp + fp) if tp + fp > 0 else 1.0
        recall = tp / (tp + fn) if tp + fn > 0 else 1.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(
            true_pos=tp, false_pos=fp, false_neg=fn, true_neg=tn,
            precision=precision, recall=recall, f1=f1,
            labelled_total=labelled_total,
            degenerate=(tp + fp == 0) or (tp + fn == 0),
        )

    def to_json(self) -> dict:
        return {
            "true_pos": self.true_pos, "false_pos": self.false_pos,
            "false_neg": self.false_neg, "true_neg": self.true_neg,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "labelled_total": self.labelled_total, "degenerate": self.degenerate,
        }


def analyze(results: Sequence[ScoredPair], store: LabelStore) -> MetricsReport:
    """Score results against the labelled pairs only.

    A labelled duplicate missing from the results entirely (blocked before
    comparison) still counts as a false negative, which keeps pre-filter
    losses visible.
    """
    accepted = {p.key() for p in results if p.accepted}
    tp = fp = fn = tn = 0
    for rec in store.records():
        key = pair_key(rec.source_id, rec.target_id)
        hit = key in accepted
        if rec.is_duplicate:
            tp += hit
            fn += not hit
        else:
            fp += hit
            tn += not hit
    return MetricsReport.from_counts(tp, fp, fn, tn, len(store))


METRIC_NAMES = ("precision", "recall", "f1")


@dataclass(frozen=True)
class MetricPrefs:
    primary: str = "f1"
    secondary: str = "precision"

    def __post_init__(self):
        if self.primary not in METRIC_NAMES or self.secondary not in METRIC_NAMES:
            raise ConfigError(f"metrics must be one of {METRIC_NAMES}")
        if self.primary == self.secondary:
            raise ConfigError("primary and secondary metric must differ")

    def key(self, report: MetricsReport) -> tuple[float, float]:
        return (getattr(report, self.primary), getattr(report, self.secondary))


def better_than(a: MetricsReport, b: MetricsReport, prefs: MetricPrefs) -> bool:
    """Strict lexicographic comparison on (primary, secondary)."""
    return prefs.key(a) > prefs.key(b)


def evaluate_against_truth(
    results: Sequence[ScoredPair], true_pairs: set[tuple[str, str]]
) -> MetricsReport:
    """Closed-world evaluation: the given pairs are all duplicates, every
    other pair is a non-duplicate."""
    accepted = {p.key() for p in results if p.accepted}
    truth = {pair_key(*t) for t in true_pairs}
    tp = len(accepted & truth)
    fp = len(accepted - truth)
    fn = len(truth - accepted)
    return MetricsReport.from_counts(tp, fp, fn, 0, len(truth))


# --------------------------------------------------------------------------
# Evaluation state shared by all heuristics
# --------------------------------------------------------------------------


@dataclass
class LearnState:
    """Everything a heuristic needs: indices, current config, labels,
    preferences, and the audit trail of evaluated configurations."""

    source: TypeIndex
    target: TypeIndex
    config: DDConfig
    store: LabelStore
    prefs: MetricPrefs = field(default_factory=MetricPrefs)
    candidate_limit: int | None = 50
    cache: RunCache = field(default_factory=RunCache)
    audit: list[dict] = field(default_factory=list)
    audit_sink: Callable[[dict], None] | None = None

    def evaluate(self, cfg: DDConfig) -> tuple[list[ScoredPair], MetricsReport]:
        results = run_duplicate_detection(
            self.source, self.target, cfg, candidate_limit=self.candidate_limit, cache=self.cache
        )
        report = analyze(results, self.store)
        entry = {
            "config_hash": cfg.config_hash(),
            "config": cfg.to_json(),
            "report": report.to_json(),
            "at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        self.audit.append(entry)
        if self.audit_sink is not None:
            self.audit_sink(entry)
        return results, report


def _weights_config(cfg: DDConfig, active: Iterable[str]) -> DDConfig:
    active = set(active)
    weights = {path: (1.0 if path in active else 0.0) for path, _ in cfg.comparison.rules}
    return cfg.replace(comparison=cfg.comparison.with_weights(weights))


# --------------------------------------------------------------------------
# Heuristics
# --------------------------------------------------------------------------


def _isolated_reports(
    state: LearnState, base: DDConfig, paths: Sequence[str]
) -> dict[str, MetricsReport]:
    out = {}
    for path in paths:
        _, report = state.evaluate(_weights_config(base, [path]))
        out[path] = report
    return out


def forward_selection(state: LearnState, paths: Sequence[str] | None = None) -> DDConfig:
    """Rank paths by their isolated result quality, then greedily add them
    while the full run keeps improving strictly; stops at the first
    non-improvement. Never returns a config worse than the starting one."""
    base = state.config
    if paths is None:
        paths = [p for p, _ in base.comparison.rules]
    if not paths:
        raise ConfigError("forward selection needs at least one path")
    _, initial_report = state.evaluate(base)

    isolated = _isolated_reports(state, base, paths)
    ranked = sorted(
        paths, key=lambda p: (*(-x for x in state.prefs.key(isolated[p])), p)
    )

    selected = [ranked[0]]
    best_cfg = _weights_config(base, selected)
    best_report = isolated[ranked[0]]
    for nxt in ranked[1:]:
        trial_cfg = _weights_config(base, selected + [nxt])
        _, trial_report = state.evaluate(trial_cfg)
        if better_than(trial_report, best_report, state.prefs):
            selected.append(nxt)
            best_cfg, best_report = trial_cfg, trial_report
        else:
            break
    if better_than(initial_report, best_report, state.prefs):
        return base
    return best_cfg


def backward_elimination(state: LearnState, paths: Sequence[str] | None = None) -> DDConfig:
    """Evaluate each path in isolation, then drop the worst ones one by one
    while the full run's report does not get strictly worse. The final
    remaining path is never eliminated."""
    base = state.config
    if paths is None:
        paths = [p for p, _ in base.comparison.rules]
    if len(paths) < 2:
        raise ConfigError("backward elimination needs at least two paths")

    isolated = _isolated_reports(state, base, paths)
    worst_first = sorted(paths, key=lambda p: (state.prefs.key(isolated[p]), p))

    current = list(paths)
    current_cfg = _weights_config(base, current)
    _, current_report = state.evaluate(current_cfg)
    for victim in worst_first:
        if len(current) <= 1:
            break
        if victim not in current:
            continue
        trial = [p for p in current if p != victim]
        trial_cfg = _weights_config(base, trial)
        _, trial_report = state.evaluate(trial_cfg)
        if better_than(current_report, trial_report, state.prefs):
            break
        current, current_cfg, current_report = trial, trial_cfg, trial_report
    return current_cfg


# numeric parameter plumbing -------------------------------------------------


@dataclass(frozen=True)
class NumericParam:
    """Handle for one climbable number: pre-filter percentage, decision
    threshold, or a single path weight."""

    kind: str  # "prefilter_pct" | "decision_threshold" | "weight"
    path: str | None = None

    @classmethod
    def parse(cls, spec: str) -> "NumericParam":
        if spec == "prefilter_pct":
            return cls("prefilter_pct")
        if spec == "decision_threshold":
            return cls("decision_threshold")
        if spec.startswith("weight:"):
            return cls("weight", spec.split(":", 1)[1])
        raise StrategyError(f"unknown numeric parameter {spec!r}")

    # values are handled in integer units: percent points, or hundredths
    def lo_hi(self) -> tuple[int, int]:
        return (0, 100)

    def default_step(self) -> int:
        return 5

    def get(self, cfg: DDConfig) -> int:
        if self.kind == "prefilter_pct":
            return cfg.pre_filter.threshold_pct
        if self.kind == "decision_threshold":
            return round(cfg.decision.threshold * 100)
        rule = cfg.comparison.as_dict().get(self.path)
        if rule is None:
            raise StrategyError(f"unknown weight path {self.path!r}")
        return round(rule.weight * 100)

    def set(self, cfg: DDConfig, units: int) -> DDConfig:
        if self.kind == "prefilter_pct":
            return cfg.replace(
                pre_filter=PreFilterConfig(cfg.pre_filter.properties, units)
            )
        if self.kind == "decision_threshold":
            return cfg.replace(decision=DecisionConfig(units / 100))
        return cfg.replace(
            comparison=cfg.comparison.with_weights({self.path: units / 100})
        )

    def step_units(self, step: float | None) -> int:
        if step is None:
            return self.default_step()
        units = round(step) if self.kind == "prefilter_pct" else round(step * 100)
        if units <= 0:
            raise StrategyError("step must be positive")
        return units


def hill_climb(
    state: LearnState,
    param: str | NumericParam,
    step: float | None = None,
    max_iters: int = 40,
) -> DDConfig:
    """Step-wise walk of one numeric parameter toward better reports.

    Both neighbors (value - step, value + step, clamped to the domain) are
    evaluated; the walk moves to a strictly better one, preferring the
    lower value on ties, and stops when neither improves.
    """
    handle = NumericParam.parse(param) if isinstance(param, str) else param
    units = handle.step_units(step)
    lo, hi = handle.lo_hi()

    cfg = state.config
    cur = handle.get(cfg)
    _, cur_report = state.evaluate(cfg)
    for _ in range(max_iters):
        neighbors = []
        for cand in (cur - units, cur + units):
            cand = min(hi, max(lo, cand))
            if cand != cur and cand not in neighbors:
                neighbors.append(cand)
        best_cand = None
        best_report = cur_report
        for cand in sorted(neighbors):
            try:
                cand_cfg = handle.set(cfg, cand)
            except ConfigError:
                continue  # e.g. zeroing the only weighted path
            _, cand_report = state.evaluate(cand_cfg)
            if better_than(cand_report, best_report, state.prefs):
                best_cand, best_report = cand, cand_report
        if best_cand is None:
            break
        cur, cur_report = best_cand, best_report
        cfg = handle.set(cfg, cur)
    return cfg


BRUTE_FORCE_BOUND = 10_000


def brute_force(state: LearnState, param: str) -> DDConfig:
    """Exhaustive sweep of one parameter's solution space (when small
    enough): every percent point, every hundredth, or every non-empty
    property subset. First-encountered wins ties."""
    base = state.config
    candidates: list[DDConfig]
    if param in ("prefilter_pct", "decision_threshold") or param.startswith("weight:"):
        handle = NumericParam.parse(param)
        values = range(0, 101)
        candidates = []
        for v in values:
            try:
                candidates.append(handle.set(base, v))
            except ConfigError:
                continue
    elif param in ("prefilter_properties", "comparison_properties"):
        if param == "prefilter_properties":
            universe = sorted(base.pre_filter.properties)
        else:
            universe = sorted(p for p, _ in base.comparison.rules)
        if 2 ** len(universe) > BRUTE_FORCE_BOUND:
            raise SpaceTooLarge(
                f"2^{len(universe)} property subsets exceed {BRUTE_FORCE_BOUND}"
            )
        subsets = sorted(
            chain.from_iterable(
                combinations(universe, r) for r in range(1, len(universe) + 1)
            )
        )
        candidates = []
        for subset in subsets:
            if param == "prefilter_properties":
                candidates.append(
                    base.replace(
                        pre_filter=PreFilterConfig(subset, base.pre_filter.threshold_pct)
                    )
                )
            else:
                candidates.append(_weights_config(base, subset))
    else:
        raise StrategyError(f"brute force cannot enumerate {param!r}")

    best_cfg = None
    best_report = None
    for cfg in candidates:
        _, report = state.evaluate(cfg)
        if best_report is None or better_than(report, best_report, state.prefs):
            best_cfg, best_report = cfg, report
    if best_cfg is None:
        raise StrategyError(f"no evaluable candidates for {param!r}")
    return best_cfg


# genetic search -------------------------------------------------------------


def applicable_comparators(ps) -> list[Comparator]:
    if ps.is_nested_instance:
        return [
            Comparator.of("levenshtein"),
            Comparator.of("exact"),
            Comparator.of("jaccard_tokens"),
            Comparator.of("uri_eq"),
        ]
    if ps.category is DatatypeCategory.NUMBER:
        return [
            Comparator.of("number_ratio"),
            Comparator.of("number_abs", tolerance=0.01),
            Comparator.of("number_abs", tolerance=1.0),
            Comparator.of("exact"),
        ]
    if ps.category is DatatypeCategory.BOOLEAN:
        return [Comparator.of("boolean_eq"), Comparator.of("exact")]
    return [
        Comparator.of("levenshtein"),
        Comparator.of("exact"),
        Comparator.of("jaccard_tokens"),
    ]


def _applicable_element_fns(category: DatatypeCategory) -> list[Standardizer]:
    if category is DatatypeCategory.NUMBER:
        return [Standardizer.of("identity")] + [
            Standardizer.of("round", decimals=d) for d in (0, 1, 2, 3, 4)
        ]
    if category is DatatypeCategory.BOOLEAN:
        return [Standardizer.of("identity")]
    return [
        Standardizer.of("lowercase"),
        Standardizer.of("trim"),
        Standardizer.of("collapse_whitespace"),
        Standardizer.of("strip_punctuation"),
        Standardizer.of("strip_diacritics"),
        Standardizer.of("identity"),
    ]


def _applicable_list_fns() -> list[Standardizer]:
    return [
        Standardizer.of("setify"),
        Standardizer.of("sort"),
        Standardizer.of("take_first", k=1),
        Standardizer.of("take_first", k=3),
    ]


def _mutate_sequence(
    seq: tuple[Standardizer, ...], category: DatatypeCategory, multi: bool, rng: random.Random
) -> tuple[Standardizer, ...]:
    element = [st for st in seq if st.name not in ("setify", "sort", "take_first")]
    listlevel = [st for st in seq if st.name in ("setify", "sort", "take_first")]
    pool_e = _applicable_element_fns(category)
    pool_l = _applicable_list_fns() if multi else []
    action = rng.choice(("add", "remove", "replace"))
    if action == "add" and len(seq) < MAX_SEQUENCE_LENGTH:
        if pool_l and rng.random() < 0.3:
            listlevel.append(rng.choice(pool_l))
        else:
            element.append(rng.choice(pool_e))
    elif action == "remove" and (element or listlevel):
        idx = rng.randrange(len(element) + len(listlevel))
        if idx < len(element):
            element.pop(idx)
        else:
            listlevel.pop(idx - len(element))
    elif element or listlevel:
        idx = rng.randrange(len(element) + len(listlevel))
        if idx < len(element):
            element[idx] = rng.choice(pool_e)
        elif pool_l:
            listlevel[idx - len(element)] = rng.choice(pool_l)
    return tuple(element + listlevel)


def genetic_search(
    state: LearnState,
    target: str,
    population: int = 8,
    generations: int = 10,
    mutation_prob: float = 0.2,
    seed: int = 0,
) -> DDConfig:
    """Evolve per-path function assignments (comparators + aggregation, or
    standardizer sequences) with tournament selection, single-point
    crossover, and elitism of one. Fully deterministic for a given seed.
    """
    if target not in ("comparators", "standardizers"):
        raise StrategyError(f"genetic target must be comparators or standardizers, got {target!r}")
    if population < 2:
        raise StrategyError("population must be >= 2")
    base = state.config
    rules = base.comparison.as_dict()
    paths = sorted(p for p, rule in rules.items() if rule.weight > 0)
    if not paths:
        raise ConfigError("no mutable paths with weight > 0")

    spec = state.source.spec
    rng = random.Random(seed)
    aggs = [Aggregation.MAX, Aggregation.AVG, Aggregation.MIN]

    if target == "comparators":
        def initial_gene(path):
            rule = rules[path]
            return (rule.comparator, rule.aggregation)

        def mutate_gene(path, gene):
            ps = spec.by_field(path)
            pool = applicable_comparators(ps) if ps else applicable_comparators_default()
            return (rng.choice(pool), rng.choice(aggs))

        def to_config(genome):
            new_rules = dict(rules)
            for path, (comp, agg) in zip(paths, genome):
                new_rules[path] = PathRule(comp, agg, rules[path].weight)
            return base.replace(comparison=ComparisonConfig.build(new_rules))
    else:
        sequences = base.plan.sequences()

        def initial_gene(path):
            return sequences.get(path, ())

        def mutate_gene(path, gene):
            ps = spec.by_field(path)
            category = ps.category if ps else DatatypeCategory.STRING
            multi = ps.multi_valued if ps else True
            return _mutate_sequence(gene, category, multi, rng)

        def to_config(genome):
            mapping = {path: list(seq) for path, seq in sequences.items()}
            for path, gene in zip(paths, genome):
                mapping[path] = list(gene)
            mapping = {p: seq for p, seq in mapping.items() if seq}
            return base.replace(plan=StandardizationPlan.build(mapping))

    def mutate(genome):
        return tuple(
            mutate_gene(path, gene) if rng.random() < mutation_prob else gene
            for path, gene in zip(paths, genome)
        )

    def crossover(g1, g2):
        if len(paths) < 2:
            return g1
        point = rng.randrange(1, len(paths))
        return g1[:point] + g2[point:]

    seed_genome = tuple(initial_gene(p) for p in paths)
    pop = [seed_genome] + [mutate(seed_genome) for _ in range(population - 1)]

    best_genome = None
    best_report = None

    for _ in range(generations):
        scored = []
        for genome in pop:
            _, report = state.evaluate(to_config(genome))
            scored.append((genome, report))
            if best_report is None or better_than(report, best_report, state.prefs):
                best_genome, best_report = genome, report
        elite = max(scored, key=lambda gr: state.prefs.key(gr[1]))[0]

        def tournament():
            a = rng.randrange(len(scored))
            b = rng.randrange(len(scored))
            ga, ra = scored[a]
            gb, rb = scored[b]
            return gb if better_than(rb, ra, state.prefs) else ga

        nxt = [elite]
        while len(nxt) < population:
            child = crossover(tournament(), tournament())
            nxt.append(mutate(child))
        pop = nxt

    return to_config(best_genome)


def applicable_comparators_default() -> list[Comparator]:
    return [Comparator.of("levenshtein"), Comparator.of("exact"), Comparator.of("jaccard_tokens")]


# --------------------------------------------------------------------------
# Strategies
# --------------------------------------------------------------------------

HEURISTIC_NAMES = (
    "forward_selection",
    "backward_elimination",
    "hill_climb",
    "genetic",
    "brute_force",
)

_NUMERIC_TARGETS = ("prefilter_pct", "decision_threshold")


@dataclass(frozen=True)
class StrategyStep:
    heuristic: str
    target: str
    options: tuple[tuple[str, object], ...] = ()

    @classmethod
    def of(cls, heuristic: str, target: str, **options) -> "StrategyStep":
        step = cls(heuristic, target, tuple(sorted(options.items())))
        step.validate()
        return step

    def opts(self) -> dict:
        return dict(self.options)

    def validate(self) -> None:
        if self.heuristic not in HEURISTIC_NAMES:
            raise StrategyError(f"unknown heuristic {self.heuristic!r}")
        t = self.target
        if self.heuristic in ("forward_selection", "backward_elimination"):
            ok = t == "weights"
        elif self.heuristic == "hill_climb":
            ok = t in _NUMERIC_TARGETS or t.startswith("weight:") or t == "weights"
        elif self.heuristic == "genetic":
            ok = t in ("comparators", "standardizers")
        else:  # brute_force
            ok = (
                t in _NUMERIC_TARGETS
                or t.startswith("weight:")
                or t in ("prefilter_properties", "comparison_properties")
            )
        if not ok:
            raise StrategyError(f"heuristic {self.heuristic} cannot target {t!r}")

    def to_json(self) -> dict:
        out = {"heuristic": self.heuristic, "target": self.target}
        if self.options:
            out["options"] = dict(self.options)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "StrategyStep":
        return cls.of(data["heuristic"], data["target"], **data.get("options", {}))


@dataclass(frozen=True)
class Strategy:
    steps: tuple[StrategyStep, ...]

    @classmethod
    def from_json(cls, data: Sequence[dict]) -> "Strategy":
        return cls(tuple(StrategyStep.from_json(d) for d in data))

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.steps]


@dataclass
class StrategyOutcome:
    config: DDConfig
    audit: list[dict]
    error: str | None = None
    steps_completed: int = 0


def _run_step(state: LearnState, step: StrategyStep) -> DDConfig:
    opts = step.opts()
    if step.heuristic == "forward_selection":
        return forward_selection(state, opts.get("paths"))
    if step.heuristic == "backward_elimination":
        return backward_elimination(state, opts.get("paths"))
    if step.heuristic == "hill_climb":
        if step.target == "weights":
            cfg = state.config
            for path, rule in cfg.comparison.rules:
                if rule.weight <= 0:
                    continue
                state.config = hill_climb(
                    state, NumericParam("weight", path),
                    step=opts.get("step"), max_iters=int(opts.get("max_iters", 40)),
                )
            return state.config
        return hill_climb(
            state, step.target, step=opts.get("step"), max_iters=int(opts.get("max_iters", 40))
        )
    if step.heuristic == "genetic":
        return genetic_search(
            state,
            step.target,
            population=int(opts.get("population", 8)),
            generations=int(opts.get("generations", 10)),
            mutation_prob=float(opts.get("mutation_prob", 0.2)),
            seed=int(opts.get("seed", 0)),
        )
    return brute_force(state, step.target)


def execute_strategy(
    state: LearnState,
    strategy: Strategy,
    on_step: Callable[[int, int], None] | None = None,
) -> StrategyOutcome:
    """Apply heuristic steps in order, each starting from the best config so
    far. A failing step aborts the strategy but keeps the best config, with
    the error surfaced on the outcome. Labelling never interleaves: callers
    hand in a label-store snapshot and queue new labels for the next round.
    """
    if len(state.store) == 0:
        raise StrategyError("label store is empty: nothing to optimize against")
    error = None
    completed = 0
    for i, step in enumerate(strategy.steps):
        if on_step is not None:
            on_step(i + 1, len(strategy.steps))
        try:
            state.config = _run_step(state, step)
            completed += 1
        except Exception as exc:  # per-step abort rule
            error = f"step {i + 1} ({step.heuristic} on {step.target}): {exc}"
            break
    return StrategyOutcome(config=state.config, audit=state.audit, error=error, steps_completed=completed)


# --------------------------------------------------------------------------
# Labelling queue and defaults
# --------------------------------------------------------------------------


def next_to_label(
    results: Sequence[ScoredPair], store: LabelStore, n: int, threshold: float
) -> list[ScoredPair]:
    """Unlabelled result pairs, most uncertain first (closest to the
    decision threshold), ties broken by similarity (desc) then ids."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    seen: set[tuple[str, str]] = set()
    queue = []
    for pair in results:
        key = pair.key()
        if key in seen or (pair.source_id, pair.target_id) in store:
            continue
        seen.add(key)
        queue.append(pair)
    queue.sort(key=lambda p: (abs(p.similarity - threshold), -p.similarity, p.source_id, p.target_id))
    return queue[:n]


def default_config(
    spec_source: MinimalDomainSpec,
    spec_target: MinimalDomainSpec,
    ignore: frozenset[str] = DEFAULT_IGNORED_FIELDS,
    bootstrap: bool = False,
) -> DDConfig:
    """Generated defaults: all paths in the pre-filter at 40%, per-category
    default plans and comparators, max aggregation, weights 1, threshold
    0.75 (0.30 for a bootstrap run with no training data yet). Paths on the
    ignore list (metadata like compliesWith) are left out entirely.
    """
    src_fields = set(spec_source.fields)
    tgt_fields = set(spec_target.fields)
    if src_fields != tgt_fields:
        raise SpecError(
            "source and target specs do not share a path set: "
            f"{sorted(src_fields ^ tgt_fields)}"
        )
    paths = [ps.field for ps in spec_source.properties if ps.field not in ignore]
    if not paths:
        raise SpecError("no usable paths after applying the ignore list")

    rules = {}
    for ps in spec_source.properties:
        if ps.field in ignore:
            continue
        if ps.category is DatatypeCategory.NUMBER and not ps.is_nested_instance:
            comp = Comparator.of("number_ratio")
        elif ps.category is DatatypeCategory.BOOLEAN and not ps.is_nested_instance:
            comp = Comparator.of("boolean_eq")
        else:
            comp = Comparator.of("levenshtein")
        rules[ps.field] = PathRule(comp, Aggregation.MAX, 1.0)

    return DDConfig(
        pre_filter=PreFilterConfig(tuple(paths), DEFAULT_PREFILTER_PCT),
        plan=default_plan(spec_source, ignore),
        comparison=ComparisonConfig.build(rules),
        decision=DecisionConfig(BOOTSTRAP_THRESHOLD if bootstrap else DEFAULT_THRESHOLD),
    )


# --------------------------------------------------------------------------
# Oracle-labelled learning loop (benchmarks and simulations)
# --------------------------------------------------------------------------


@dataclass
class RoundSummary:
    round: int
    labels_total: int
    truth_report: MetricsReport
    seconds: float


def simulate_learning_rounds(
    state: LearnState,
    truth: set[tuple[str, str]],
    strategy: Strategy,
    rounds: int = 5,
    labels_per_round: int = 20,
    stop_at_f1: float | None = None,
) -> list[RoundSummary]:
    """Alternate oracle labelling and strategy execution.

    Each round surfaces proposals (with the bootstrap-low threshold while
    the label store is still empty), labels the most uncertain unlabelled
    pairs using the truth set as a closed-world oracle, runs the strategy,
    and evaluates the resulting config against the full truth set.
    Uncertainty is always measured against the config's own decision
    threshold; the bootstrap threshold only widens what gets surfaced.
    """
    truth_keys = {pair_key(*t) for t in truth}
    summaries = []
    for rnd in range(1, rounds + 1):
        start = time.perf_counter()
        surface_cfg = state.config
        if len(state.store) == 0 and surface_cfg.decision.threshold > BOOTSTRAP_THRESHOLD:
            surface_cfg = surface_cfg.replace(decision=DecisionConfig(BOOTSTRAP_THRESHOLD))
        results, _ = state.evaluate(surface_cfg)
        queue = next_to_label(
            results, state.store, labels_per_round, state.config.decision.threshold
        )
        for pair in queue:
            state.store.record(pair.source_id, pair.target_id, pair.key() in truth_keys)
        outcome = execute_strategy(state, strategy)
        if outcome.error:
            raise StrategyError(outcome.error)
        results, _ = state.evaluate(state.config)
        report = evaluate_against_truth(results, truth_keys)
        summaries.append(
            RoundSummary(rnd, len(state.store), report, time.perf_counter() - start)
        )
        if stop_at_f1 is not None and report.f1 >= stop_at_f1:
            break
    return summaries
