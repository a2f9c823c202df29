"""File-backed engine state shared by the CLI and the HTTP service.

Layout under the state directory:

    state.json            registry of graphs, indices, pairs, jobs
    graphs/<id>.nt        canonical N-Triples, source of truth for indices
    labels/<pair>.jsonl   append-only label log (last write wins on replay)
    audit/<job>.jsonl     strategy audit logs, append-only

Indices are rebuilt from graphs on restore. ``persist`` rewrites a
deterministic snapshot (sorted keys, compacted labels) so that
persist -> restore -> persist is byte-identical.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .compare import (
    DDConfig,
    DecisionConfig,
    ScoredPair,
    run_duplicate_detection,
    validate_config,
)
from .errors import SpecError, StoreError
from .index import TypeIndex, build_index
from .kg import RDF_TYPE, Graph, Iri, parse_ntriples, serialize_ntriples
from .learn import (
    BOOTSTRAP_THRESHOLD,
    DEFAULT_IGNORED_FIELDS,
    LabelStore,
    LearnState,
    MetricPrefs,
    MetricsReport,
    Strategy,
    StrategyOutcome,
    analyze,
    default_config,
    execute_strategy,
    next_to_label,
)
from .schema import MinimalDomainSpec, extract_domain_spec, infer_emergent_schema


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class GraphEntry:
    id: str
    name: str
    graph: Graph

    def meta(self) -> dict:
        return {"id": self.id, "name": self.name, "triples": len(self.graph)}


@dataclass
class IndexEntry:
    id: str
    graph_id: str
    type_iri: str
    spec_source: str
    spec_graph_id: str | None
    depth: int
    spec: MinimalDomainSpec
    index: TypeIndex

    def meta(self) -> dict:
        return {
            "id": self.id,
            "graph_id": self.graph_id,
            "type_iri": self.type_iri,
            "spec_source": self.spec_source,
            "spec_graph_id": self.spec_graph_id,
            "depth": self.depth,
            "spec": self.spec.to_json(),
        }


@dataclass
class PairState:
    id: str
    source_index: str
    target_index: str
    config: DDConfig
    config_version: int
    store: LabelStore
    strategy_status: dict = field(default_factory=lambda: {"state": "idle"})
    results: list[ScoredPair] | None = None
    last_run_threshold: float | None = None
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def meta(self) -> dict:
        return {
            "id": self.id,
            "source_index": self.source_index,
            "target_index": self.target_index,
            "config": self.config.to_json(),
            "config_version": self.config_version,
            "strategy_status": self.strategy_status,
        }


@dataclass
class JobRecord:
    id: str
    kind: str
    pair_id: str
    status: str = "queued"  # queued | running | done | failed
    created: str = field(default_factory=_now)
    finished: str | None = None
    error: str | None = None
    summary: dict = field(default_factory=dict)

    def meta(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "pair_id": self.pair_id,
            "status": self.status,
            "created": self.created,
            "finished": self.finished,
            "error": self.error,
            "summary": self.summary,
        }


class ServiceState:
    """All engine state rooted at one directory.

    Mutations go through methods that update memory and write through to
    disk before returning, so a crash never loses an acknowledged change.
    """

    def __init__(
        self,
        state_dir: str | Path,
        candidate_limit: int | None = 50,
        ignored_fields: frozenset[str] = DEFAULT_IGNORED_FIELDS,
    ):
        self.dir = Path(state_dir)
        self.candidate_limit = candidate_limit
        self.ignored_fields = frozenset(ignored_fields)
        self.graphs: dict[str, GraphEntry] = {}
        self.indices: dict[str, IndexEntry] = {}
        self.pairs: dict[str, PairState] = {}
        self.jobs: dict[str, JobRecord] = {}
        self.counters = {"graph": 0, "index": 0, "pair": 0, "job": 0}
        self.lock = threading.RLock()
        for sub in ("graphs", "labels", "audit"):
            (self.dir / sub).mkdir(parents=True, exist_ok=True)
        self._restore()

    # -- persistence --------------------------------------------------------

    def _state_file(self) -> Path:
        return self.dir / "state.json"

    def save(self) -> None:
        """Atomically write the registry file (serialized by the state lock)."""
        with self.lock:
            payload = {
                "counters": self.counters,
                "graphs": {g.id: g.meta() for g in self.graphs.values()},
                "indices": {e.id: e.meta() for e in self.indices.values()},
                "pairs": {p.id: p.meta() for p in self.pairs.values()},
                "jobs": {j.id: j.meta() for j in self.jobs.values()},
            }
            tmp = self._state_file().with_suffix(".tmp")
            try:
                tmp.write_text(
                    json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
                )
                os.replace(tmp, self._state_file())
            except OSError as exc:
                raise StoreError(f"cannot write {self._state_file()}: {exc}") from exc

    def persist(self) -> None:
        """Deterministic full snapshot: registry, canonical graph files,
        compacted label logs."""
        with self.lock:
            self.save()
            for entry in self.graphs.values():
                path = self.dir / "graphs" / f"{entry.id}.nt"
                path.write_text(serialize_ntriples(entry.graph), encoding="utf-8")
            for pair in self.pairs.values():
                pair.store.compact()

    def _restore(self) -> None:
        state_file = self._state_file()
        if not state_file.exists():
            return
        try:
            payload = json.loads(state_file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"cannot restore {state_file}: {exc}") from exc

        self.counters = payload.get("counters", self.counters)
        for gid, meta in sorted(payload.get("graphs", {}).items()):
            path = self.dir / "graphs" / f"{gid}.nt"
            if not path.exists():
                raise StoreError(f"missing graph file for {gid}: {path}")
            graph = parse_ntriples(path.read_text(encoding="utf-8"))
            self.graphs[gid] = GraphEntry(gid, meta["name"], graph)
        for iid, meta in sorted(payload.get("indices", {}).items()):
            spec = MinimalDomainSpec.from_json(meta["spec"])
            graph_entry = self.graphs.get(meta["graph_id"])
            if graph_entry is None:
                raise StoreError(f"index {iid} references unknown graph {meta['graph_id']}")
            self.indices[iid] = IndexEntry(
                id=iid,
                graph_id=meta["graph_id"],
                type_iri=meta["type_iri"],
                spec_source=meta["spec_source"],
                spec_graph_id=meta.get("spec_graph_id"),
                depth=meta["depth"],
                spec=spec,
                index=build_index(graph_entry.graph, spec),
            )
        for pid, meta in sorted(payload.get("pairs", {}).items()):
            status = meta.get("strategy_status", {"state": "idle"})
            if status.get("state") == "running":
                status = {"state": "failed", "reason": "interrupted by restart"}
            self.pairs[pid] = PairState(
                id=pid,
                source_index=meta["source_index"],
                target_index=meta["target_index"],
                config=DDConfig.from_json(meta["config"]),
                config_version=meta["config_version"],
                store=LabelStore(self.dir / "labels" / f"{pid}.jsonl"),
                strategy_status=status,
            )
        for jid, meta in sorted(payload.get("jobs", {}).items()):
            job = JobRecord(
                id=jid,
                kind=meta["kind"],
                pair_id=meta["pair_id"],
                status=meta["status"],
                created=meta["created"],
                finished=meta.get("finished"),
                error=meta.get("error"),
                summary=meta.get("summary", {}),
            )
            if job.status in ("queued", "running"):
                job.status = "failed"
                job.error = "interrupted by restart"
                job.finished = job.finished or job.created
            self.jobs[jid] = job

    # -- registry operations -------------------------------------------------

    def _next_id(self, kind: str, prefix: str) -> str:
        self.counters[kind] += 1
        return f"{prefix}{self.counters[kind]}"

    def ingest_graph(self, name: str, ntriples: str) -> GraphEntry:
        graph = parse_ntriples(ntriples)
        with self.lock:
            gid = self._next_id("graph", "g")
            entry = GraphEntry(gid, name, graph)
            path = self.dir / "graphs" / f"{gid}.nt"
            path.write_text(serialize_ntriples(graph), encoding="utf-8")
            self.graphs[gid] = entry
            self.save()
        return entry

    def type_counts(self, graph: Graph) -> dict[str, int]:
        counts: dict[str, int] = {}
        for t in graph:
            if t.predicate.value == RDF_TYPE and isinstance(t.object, Iri):
                counts[t.object.value] = counts.get(t.object.value, 0) + 1
        return dict(sorted(counts.items()))

    def create_index(
        self,
        graph_id: str,
        type_iri: str,
        spec_source: str = "emergent",
        spec_graph_id: str | None = None,
        depth: int = 1,
        extra_categories=None,
    ) -> IndexEntry:
        entry = self.graphs.get(graph_id)
        if entry is None:
            raise KeyError(f"unknown graph {graph_id}")
        if spec_source == "emergent":
            spec = infer_emergent_schema(entry.graph, type_iri, depth, extra_categories)
        else:
            spec_graph = entry.graph
            if spec_graph_id is not None:
                spec_entry = self.graphs.get(spec_graph_id)
                if spec_entry is None:
                    raise KeyError(f"unknown graph {spec_graph_id}")
                spec_graph = spec_entry.graph
            spec = extract_domain_spec(spec_graph, spec_source, depth, extra_categories)
            if spec.type_iri != type_iri:
                raise SpecError(
                    f"shape targets {spec.type_iri}, index requested for {type_iri}"
                )
        index = build_index(entry.graph, spec)
        with self.lock:
            iid = self._next_id("index", "idx")
            ie = IndexEntry(
                id=iid,
                graph_id=graph_id,
                type_iri=type_iri,
                spec_source=spec_source,
                spec_graph_id=spec_graph_id,
                depth=depth,
                spec=spec,
                index=index,
            )
            self.indices[iid] = ie
            self.save()
        return ie

    def ensure_pair(self, source_index: str, target_index: str) -> PairState:
        for idx in (source_index, target_index):
            if idx not in self.indices:
                raise KeyError(f"unknown index {idx}")
        with self.lock:
            for pair in self.pairs.values():
                if pair.source_index == source_index and pair.target_index == target_index:
                    return pair
            src = self.indices[source_index]
            tgt = self.indices[target_index]
            config = default_config(src.spec, tgt.spec, ignore=self.ignored_fields)
            pid = self._next_id("pair", "p")
            pair = PairState(
                id=pid,
                source_index=source_index,
                target_index=target_index,
                config=config,
                config_version=1,
                store=LabelStore(self.dir / "labels" / f"{pid}.jsonl"),
            )
            self.pairs[pid] = pair
            self.save()
        return pair

    def get_pair(self, pair_id: str) -> PairState:
        pair = self.pairs.get(pair_id)
        if pair is None:
            raise KeyError(f"unknown pair {pair_id}")
        return pair

    def put_config(self, pair_id: str, config_json: dict) -> PairState:
        pair = self.get_pair(pair_id)
        config = DDConfig.from_json(config_json)
        src = self.indices[pair.source_index]
        tgt = self.indices[pair.target_index]
        validate_config(config, src.spec, tgt.spec)
        with pair.lock:
            pair.config = config
            pair.config_version += 1
            self.save()
        return pair

    # -- detection and learning ----------------------------------------------

    def effective_run_config(self, pair: PairState) -> tuple[DDConfig, bool]:
        """The config a run should use: with an empty label store the
        decision threshold drops to the bootstrap value so that the first
        labelling round sees enough proposals."""
        if len(pair.store) == 0 and pair.config.decision.threshold > BOOTSTRAP_THRESHOLD:
            return (
                pair.config.replace(decision=DecisionConfig(BOOTSTRAP_THRESHOLD)),
                True,
            )
        return pair.config, False

    def run_pair(self, pair_id: str, config: DDConfig | None = None) -> list[ScoredPair]:
        pair = self.get_pair(pair_id)
        bootstrap = False
        if config is None:
            config, bootstrap = self.effective_run_config(pair)
        src = self.indices[pair.source_index]
        tgt = self.indices[pair.target_index]
        results = run_duplicate_detection(
            src.index, tgt.index, config, candidate_limit=self.candidate_limit
        )
        with pair.lock:
            pair.results = results
            pair.last_run_threshold = config.decision.threshold
        return results

    def metrics(self, pair_id: str) -> MetricsReport:
        pair = self.get_pair(pair_id)
        return analyze(pair.results or [], pair.store)

    def labels_next(self, pair_id: str, n: int) -> list[ScoredPair]:
        # uncertainty is measured against the config's decision threshold,
        # even when the results came from a bootstrap-low run
        pair = self.get_pair(pair_id)
        return next_to_label(
            pair.results or [], pair.store, n, pair.config.decision.threshold
        )

    def record_label(self, pair_id: str, source_id: str, target_id: str, is_duplicate: bool):
        pair = self.get_pair(pair_id)
        with pair.lock:
            return pair.store.record(source_id, target_id, is_duplicate)

    def run_strategy(
        self,
        pair_id: str,
        strategy: Strategy,
        prefs: MetricPrefs,
        job_id: str | None = None,
        on_step: Callable[[int, int], None] | None = None,
    ) -> StrategyOutcome:
        """Execute a strategy against a label-store snapshot; on success the
        pair adopts the resulting config and fresh results."""
        pair = self.get_pair(pair_id)
        src = self.indices[pair.source_index]
        tgt = self.indices[pair.target_index]
        audit_path = self.dir / "audit" / f"{job_id}.jsonl" if job_id else None

        sink = None
        if audit_path is not None:
            fh = open(audit_path, "a", encoding="utf-8")

            def sink(entry: dict):
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                fh.flush()

        state = LearnState(
            source=src.index,
            target=tgt.index,
            config=pair.config,
            store=pair.store.snapshot(),
            prefs=prefs,
            candidate_limit=self.candidate_limit,
            audit_sink=sink,
        )
        try:
            outcome = execute_strategy(state, strategy, on_step=on_step)
        finally:
            if audit_path is not None:
                fh.close()
        with pair.lock:
            pair.config = outcome.config
            pair.config_version += 1
            self.save()
        self.run_pair(pair_id, pair.config)
        return outcome

    def audit_entries(self, job_id: str) -> list[dict]:
        path = self.dir / "audit" / f"{job_id}.jsonl"
        if not path.exists():
            return []
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
        return entries
