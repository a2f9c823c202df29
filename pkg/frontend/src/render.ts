import type { DashboardModel, StrategyRun } from "./dashboard.js";
import type { LabellingState, PairCard } from "./labelling.js";
import type { JobRecord, PairSummary } from "./types.js";

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

const pct = (x: number) => `${(x * 100).toFixed(1)}%`;

function cardTable(card: PairCard): string {
  const rows = card.rows
    .map((row) => {
      const sim = row.similarity === null ? "—" : row.similarity.toFixed(3);
      return `<tr>
        <th>${esc(row.path)}</th>
        <td>${row.sourceValues.map(esc).join("<br>") || "<i>absent</i>"}</td>
        <td>${row.targetValues.map(esc).join("<br>") || "<i>absent</i>"}</td>
        <td class="sim">${sim}</td>
      </tr>`;
    })
    .join("");
  const verdict = card.accepted ? "proposed duplicate" : "below threshold";
  return `
    <div class="pair-head">
      <code>${esc(card.sourceId)}</code> vs <code>${esc(card.targetId)}</code>
    </div>
    <div class="simbar">
      <div class="simbar-fill" style="width:${pct(card.similarity)}"></div>
      <div class="simbar-threshold" style="left:${pct(card.threshold)}"
           title="decision threshold ${card.threshold}"></div>
    </div>
    <p>similarity <b>${card.similarity.toFixed(4)}</b>
       (threshold ${card.threshold}, ${verdict})</p>
    <table class="card-table">
      <thead><tr><th>path</th><th>source</th><th>target</th><th>sim</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderLabelling(el: HTMLElement, state: LabellingState, labelled: number): void {
  if (state.kind === "loading") {
    el.innerHTML = `<p class="muted">loading queue…</p>`;
    return;
  }
  if (state.kind === "locked") {
    const status = state.status;
    const progress =
      status.state === "running" ? ` (step ${status.step} of ${status.total})` : "";
    el.innerHTML = `
      <div class="banner banner-locked">
        Strategy running${progress} — labelling is locked until it completes.
      </div>
      <button id="retry">check again</button>`;
    return;
  }
  if (state.kind === "empty") {
    el.innerHTML = `
      <div class="banner">Queue empty — ${labelled} pair(s) labelled this session.
      Run detection again or start a strategy from the dashboard.</div>
      <button id="retry">refresh</button>`;
    return;
  }
  if (state.kind === "error") {
    el.innerHTML = `<div class="banner banner-error">${esc(state.message)}</div>
      <button id="retry">retry</button>`;
    return;
  }
  el.innerHTML = `
    ${cardTable(state.card)}
    <div class="actions">
      <button id="decide-yes">duplicate <kbd>y</kbd></button>
      <button id="decide-no">not a duplicate <kbd>n</kbd></button>
      <button id="decide-skip">skip <kbd>s</kbd></button>
      <span class="muted">${state.remaining} in queue, ${labelled} labelled</span>
    </div>`;
}

export function renderDashboard(el: HTMLElement, model: DashboardModel): void {
  const m = model.metrics;
  const warn = model.degenerateWarning
    ? `<span class="badge badge-warn" id="degenerate-badge"
         title="one side of the labelled data is empty">degenerate</span>`
    : "";
  const status = model.pair.strategy_status;
  const statusText =
    status.state === "running"
      ? `running (step ${status.step}/${status.total})`
      : status.state === "failed"
        ? `failed: ${status.reason}`
        : "idle";
  el.innerHTML = `
    <div class="metric-cards">
      <div class="metric"><b>${m.precision.toFixed(3)}</b><span>precision</span></div>
      <div class="metric"><b>${m.recall.toFixed(3)}</b><span>recall</span></div>
      <div class="metric"><b>${m.f1.toFixed(3)}</b><span>F1</span> ${warn}</div>
    </div>
    <table class="kv">
      <tr><th>labelled pairs</th><td>${m.labelled_total}</td></tr>
      <tr><th>tp / fp / fn / tn</th>
          <td>${m.true_pos} / ${m.false_pos} / ${m.false_neg} / ${m.true_neg}</td></tr>
      <tr><th>scored candidates</th><td>${model.scoredTotal}</td></tr>
      <tr><th>accepted pairs</th><td>${model.acceptedTotal}</td></tr>
      <tr><th>config version</th><td>${model.configVersion}</td></tr>
      <tr><th>strategy</th><td id="strategy-status">${esc(statusText)}</td></tr>
    </table>
    <h3>run a strategy</h3>
    <form id="strategy-form">
      <textarea id="strategy-steps" rows="6" spellcheck="false">${esc(
        JSON.stringify(
          [
            { heuristic: "forward_selection", target: "weights" },
            { heuristic: "hill_climb", target: "decision_threshold", options: { step: 0.05 } },
          ],
          null,
          2,
        ),
      )}</textarea>
      <label>primary <select id="pref-primary">
        <option>f1</option><option>precision</option><option>recall</option>
      </select></label>
      <label>secondary <select id="pref-secondary">
        <option>precision</option><option>recall</option><option>f1</option>
      </select></label>
      <button type="submit">start</button>
      <span id="strategy-job" class="muted"></span>
    </form>
    <div id="audit"></div>`;
}

export function renderJobProgress(el: HTMLElement, job: JobRecord, pair: PairSummary): void {
  const status = pair.strategy_status;
  const step = status.state === "running" ? ` step ${status.step}/${status.total}` : "";
  el.textContent = `job ${job.id}: ${job.status}${step}`;
}

export function renderAudit(el: HTMLElement, run: StrategyRun): void {
  const entries = run.audit;
  const tail = entries
    .slice(-10)
    .map(
      (e) =>
        `<li><code>${esc(e.config_hash)}</code> f1=${e.report.f1.toFixed(3)} ` +
        `p=${e.report.precision.toFixed(3)} r=${e.report.recall.toFixed(3)}</li>`,
    )
    .join("");
  el.innerHTML = `
    <h3>strategy audit</h3>
    <p>${entries.length} configuration evaluation(s); final status ${run.job.status}
      ${run.job.error ? `— ${esc(run.job.error)}` : ""}</p>
    <ul class="audit-list">${tail}</ul>`;
}

export function renderPairPicker(el: HTMLSelectElement, pairs: PairSummary[]): void {
  el.innerHTML = pairs
    .map(
      (p) =>
        `<option value="${esc(p.id)}">${esc(p.id)}: ${esc(p.source_index)} → ${esc(
          p.target_index,
        )} (${p.labels} labels)</option>`,
    )
    .join("");
}
