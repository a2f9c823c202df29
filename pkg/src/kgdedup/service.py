"""HTTP service over the engine: ingestion, indexing, detection runs,
labelling, metrics, and strategy execution as background jobs.

Single-node and file-backed: every acknowledged mutation is on disk before
the response goes out. Long work (detection runs, strategies) happens in
background jobs polled via /jobs/{id}; labelling is locked with 409 while
a strategy is running so training data stays frozen per strategy.
"""
from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import ConfigError, ParseError, PlanError, SpecError, StoreError, StrategyError
from .learn import MetricPrefs, Strategy
from .schema import DatatypeCategory
from .store import JobRecord, PairState, ServiceState

logger = logging.getLogger(__name__)


class Conflict(Exception):
    """Mapped to HTTP 409."""


class GraphIn(BaseModel):
    name: str
    ntriples: str


class IndexIn(BaseModel):
    graph: str
    type_iri: str
    spec_source: str = "emergent"
    spec_graph: str | None = None
    depth: int = Field(default=1, ge=1)
    categories: dict[str, str] = Field(
        default_factory=dict,
        description="datatype category overrides: IRI -> string|number|boolean",
    )


class PairIn(BaseModel):
    source_index: str
    target_index: str


class LabelIn(BaseModel):
    source_id: str
    target_id: str
    is_duplicate: bool


class StrategyIn(BaseModel):
    steps: list[dict]
    prefs: dict = Field(default_factory=dict)


def create_app(
    state_dir: str | Path,
    candidate_limit: int | None = 50,
    ignored_fields: tuple[str, ...] = ("compliesWith",),
    ui_dir: str | Path | None = None,
) -> FastAPI:
    svc = ServiceState(
        state_dir, candidate_limit=candidate_limit, ignored_fields=frozenset(ignored_fields)
    )
    app = FastAPI(title="kgdedup service")
    app.state.svc = svc
    executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="kgdedup-job")
    app.state.executor = executor
    busy: dict[str, str] = {}  # pair id -> job id
    busy_lock = threading.Lock()

    # -- error mapping -------------------------------------------------------

    @app.exception_handler(ParseError)
    async def _parse_error(request: Request, exc: ParseError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"error": str(exc), "line": exc.line, "reason": exc.reason}},
        )

    @app.exception_handler(KeyError)
    async def _not_found(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": str(exc.args[0])})

    for exc_type in (ConfigError, PlanError, SpecError, StrategyError):
        @app.exception_handler(exc_type)
        async def _invalid(request: Request, exc: Exception):
            return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(Conflict)
    async def _conflict(request: Request, exc: Conflict):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        fault = uuid.uuid4().hex[:12]
        logger.exception("store failure %s", fault)
        return JSONResponse(status_code=500, content={"detail": {"error": "internal", "id": fault}})

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        fault = uuid.uuid4().hex[:12]
        logger.exception("internal fault %s", fault)
        return JSONResponse(status_code=500, content={"detail": {"error": "internal", "id": fault}})

    # -- helpers --------------------------------------------------------------

    def pair_or_404(pair_id: str) -> PairState:
        return svc.get_pair(pair_id)

    def begin_job(pair: PairState, kind: str) -> JobRecord:
        with busy_lock:
            if pair.id in busy:
                raise Conflict(f"pair {pair.id} already has job {busy[pair.id]} running")
            with svc.lock:
                jid = svc._next_id("job", "j")
            job = JobRecord(id=jid, kind=kind, pair_id=pair.id)
            svc.jobs[jid] = job
            busy[pair.id] = jid
            svc.save()
            return job

    def finish_job(job: JobRecord, error: str | None = None, summary: dict | None = None):
        from .store import _now

        with busy_lock:
            job.status = "failed" if error else "done"
            job.error = error
            job.finished = _now()
            if summary:
                job.summary = summary
            busy.pop(job.pair_id, None)
            svc.save()

    # -- graphs and indices ----------------------------------------------------

    @app.post("/graphs", status_code=201)
    def post_graph(body: GraphIn):
        entry = svc.ingest_graph(body.name, body.ntriples)
        return {
            "id": entry.id,
            "name": entry.name,
            "triples": len(entry.graph),
            "types": svc.type_counts(entry.graph),
        }

    @app.get("/graphs")
    def list_graphs():
        return [g.meta() for g in svc.graphs.values()]

    @app.post("/indices", status_code=201)
    def post_index(body: IndexIn):
        try:
            extra = {
                iri: DatatypeCategory(name) for iri, name in body.categories.items()
            }
        except ValueError as exc:
            raise SpecError(f"unknown datatype category: {exc}") from exc
        entry = svc.create_index(
            body.graph, body.type_iri, body.spec_source, body.spec_graph, body.depth,
            extra_categories=extra or None,
        )
        return {"id": entry.id, "spec": entry.spec.to_json(), "documents": len(entry.index)}

    @app.get("/indices")
    def list_indices():
        return [{**e.meta(), "documents": len(e.index)} for e in svc.indices.values()]

    # -- pairs -----------------------------------------------------------------

    @app.post("/pairs", status_code=201)
    def post_pair(body: PairIn):
        pair = svc.ensure_pair(body.source_index, body.target_index)
        return pair_summary(pair)

    @app.get("/pairs")
    def list_pairs():
        return [pair_summary(p) for p in svc.pairs.values()]

    def pair_summary(pair: PairState) -> dict:
        return {
            "id": pair.id,
            "source_index": pair.source_index,
            "target_index": pair.target_index,
            "config_version": pair.config_version,
            "strategy_status": pair.strategy_status,
            "labels": len(pair.store),
            "has_results": pair.results is not None,
            "decision_threshold": pair.config.decision.threshold,
        }

    @app.get("/pairs/{pair_id}")
    def get_pair(pair_id: str):
        return pair_summary(pair_or_404(pair_id))

    @app.get("/pairs/{pair_id}/config")
    def get_config(pair_id: str):
        pair = pair_or_404(pair_id)
        return {"version": pair.config_version, "config": pair.config.to_json()}

    @app.put("/pairs/{pair_id}/config")
    def put_config(pair_id: str, body: dict):
        pair = pair_or_404(pair_id)
        with busy_lock:
            if pair.id in busy:
                raise Conflict(f"pair {pair.id} has a running job")
        pair = svc.put_config(pair_id, body)
        return {"version": pair.config_version, "config": pair.config.to_json()}

    # -- detection runs ----------------------------------------------------------

    @app.post("/pairs/{pair_id}/runs", status_code=202)
    def post_run(pair_id: str):
        pair = pair_or_404(pair_id)
        _, bootstrap = svc.effective_run_config(pair)
        job = begin_job(pair, "dd_run")

        def work():
            try:
                results = svc.run_pair(pair.id)
                finish_job(
                    job,
                    summary={
                        "pairs": len(results),
                        "accepted": sum(p.accepted for p in results),
                        "bootstrap": bootstrap,
                    },
                )
            except Exception as exc:
                logger.exception("run job %s failed", job.id)
                finish_job(job, error=str(exc))

        executor.submit(work)
        return {"job": job.id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = svc.jobs.get(job_id)
        if job is None:
            raise KeyError(job_id)
        return job.meta()

    @app.get("/jobs/{job_id}/log")
    def get_job_log(job_id: str):
        if job_id not in svc.jobs:
            raise KeyError(job_id)
        return {"entries": svc.audit_entries(job_id)}

    @app.get("/pairs/{pair_id}/results")
    def get_results(
        pair_id: str,
        accepted: bool | None = None,
        offset: int = 0,
        limit: int = 100,
    ):
        pair = pair_or_404(pair_id)
        results = pair.results or []
        if accepted is not None:
            results = [p for p in results if p.accepted == accepted]
        total = len(results)
        page = results[offset : offset + limit]
        return {
            "total": total,
            "offset": offset,
            "items": [p.to_json() for p in page],
            "threshold": pair.last_run_threshold,
        }

    # -- labelling ----------------------------------------------------------------

    @app.get("/pairs/{pair_id}/labels/next")
    def labels_next(pair_id: str, n: int = 10):
        pair = pair_or_404(pair_id)
        with busy_lock:
            jid = busy.get(pair.id)
            if jid and svc.jobs[jid].kind == "strategy":
                raise Conflict("strategy running: labelling is locked until it completes")
        queue = svc.labels_next(pair_id, n)
        source_docs = svc.indices[pair.source_index].index.docs
        target_docs = svc.indices[pair.target_index].index.docs
        items = []
        for p in queue:
            entry = p.to_json()
            # both instances' raw field tables, so the card renders API
            # data only (self-joins may have either orientation)
            src = source_docs.get(p.source_id) or target_docs.get(p.source_id)
            tgt = target_docs.get(p.target_id) or source_docs.get(p.target_id)
            entry["source_fields"] = src.to_json()["fields"] if src else {}
            entry["target_fields"] = tgt.to_json()["fields"] if tgt else {}
            items.append(entry)
        return {
            "items": items,
            "threshold": pair.config.decision.threshold,
        }

    @app.post("/pairs/{pair_id}/labels", status_code=201)
    def post_label(pair_id: str, body: LabelIn):
        if not body.source_id or not body.target_id:
            raise ConfigError("label ids must be non-empty")
        rec = svc.record_label(pair_id, body.source_id, body.target_id, body.is_duplicate)
        return rec.to_json()

    @app.get("/pairs/{pair_id}/labels")
    def list_labels(pair_id: str):
        pair = pair_or_404(pair_id)
        return {"total": len(pair.store), "items": [r.to_json() for r in pair.store.records()]}

    @app.get("/pairs/{pair_id}/metrics")
    def get_metrics(pair_id: str):
        pair_or_404(pair_id)
        return svc.metrics(pair_id).to_json()

    # -- strategies -----------------------------------------------------------------

    @app.post("/pairs/{pair_id}/strategies", status_code=202)
    def post_strategy(pair_id: str, body: StrategyIn):
        pair = pair_or_404(pair_id)
        strategy = Strategy.from_json(body.steps)
        prefs = MetricPrefs(**body.prefs) if body.prefs else MetricPrefs()
        if len(pair.store) == 0:
            raise StrategyError("label store is empty: nothing to optimize against")
        job = begin_job(pair, "strategy")
        total = len(strategy.steps)
        pair.strategy_status = {"state": "running", "step": 0, "total": total, "job_id": job.id}
        svc.save()

        def on_step(k: int, n: int):
            pair.strategy_status = {"state": "running", "step": k, "total": n, "job_id": job.id}

        def work():
            try:
                outcome = svc.run_strategy(pair.id, strategy, prefs, job_id=job.id, on_step=on_step)
                if outcome.error:
                    pair.strategy_status = {"state": "failed", "reason": outcome.error}
                    finish_job(
                        job,
                        error=outcome.error,
                        summary={"steps_completed": outcome.steps_completed},
                    )
                else:
                    pair.strategy_status = {"state": "idle"}
                    finish_job(
                        job,
                        summary={
                            "steps_completed": outcome.steps_completed,
                            "evaluations": len(outcome.audit),
                            "config_hash": outcome.config.config_hash(),
                        },
                    )
            except Exception as exc:
                logger.exception("strategy job %s failed", job.id)
                pair.strategy_status = {"state": "failed", "reason": str(exc)}
                finish_job(job, error=str(exc))

        executor.submit(work)
        return {"job": job.id}

    # -- static UI -------------------------------------------------------------------

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
