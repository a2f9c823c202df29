import { ApiClient } from "./api.js";
import { DashboardController } from "./dashboard.js";
import { actionForKey, isTypingTarget } from "./keyboard.js";
import { LabellingController } from "./labelling.js";
import {
  renderAudit,
  renderDashboard,
  renderJobProgress,
  renderLabelling,
  renderPairPicker,
} from "./render.js";
import type { StrategyStepSpec } from "./types.js";

const api = new ApiClient("");

const picker = document.getElementById("pair-picker") as HTMLSelectElement;
const labelRoot = document.getElementById("labelling") as HTMLElement;
const dashRoot = document.getElementById("dashboard") as HTMLElement;
const tabs = Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tab]"));

let labelling: LabellingController | null = null;
let dashboard: DashboardController | null = null;

function activeTab(): string {
  return document.querySelector(".tab-active")?.getAttribute("data-tab") ?? "label";
}

function paintLabelling(): void {
  if (labelling) {
    renderLabelling(labelRoot, labelling.state, labelling.labelledThisSession);
    wireLabellingButtons();
  }
}

function wireLabellingButtons(): void {
  const hook = (id: string, fn: () => void) =>
    document.getElementById(id)?.addEventListener("click", fn);
  hook("decide-yes", () => void decide("yes"));
  hook("decide-no", () => void decide("no"));
  hook("decide-skip", () => void decide("skip"));
  hook("retry", () => void refreshLabelling());
}

async function decide(action: "yes" | "no" | "skip"): Promise<void> {
  if (!labelling) return;
  await labelling.apply(action);
  paintLabelling();
}

async function refreshLabelling(): Promise<void> {
  if (!labelling) return;
  await labelling.refresh();
  paintLabelling();
}

async function refreshDashboard(): Promise<void> {
  if (!dashboard) return;
  const model = await dashboard.load();
  renderDashboard(dashRoot, model);
  const form = document.getElementById("strategy-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submitStrategy();
  });
}

async function submitStrategy(): Promise<void> {
  if (!dashboard) return;
  const stepsEl = document.getElementById("strategy-steps") as HTMLTextAreaElement;
  const jobEl = document.getElementById("strategy-job") as HTMLElement;
  let steps: StrategyStepSpec[];
  try {
    steps = JSON.parse(stepsEl.value);
  } catch (err) {
    jobEl.textContent = `invalid steps JSON: ${err}`;
    return;
  }
  const primary = (document.getElementById("pref-primary") as HTMLSelectElement).value;
  const secondary = (document.getElementById("pref-secondary") as HTMLSelectElement).value;
  try {
    const { job } = await dashboard.submitStrategy(steps, { primary, secondary });
    jobEl.textContent = `job ${job}: queued`;
    const run = await dashboard.watchJob(job, (j, pair) => renderJobProgress(jobEl, j, pair));
    const auditEl = document.getElementById("audit") as HTMLElement;
    renderAudit(auditEl, run);
    await refreshDashboard();
  } catch (err) {
    jobEl.textContent = String(err);
  }
}

async function selectPair(pairId: string): Promise<void> {
  labelling = new LabellingController(api, pairId);
  dashboard = new DashboardController(api, pairId);
  await Promise.all([refreshLabelling(), refreshDashboard()]);
}

function showTab(name: string): void {
  for (const tab of tabs) {
    tab.classList.toggle("tab-active", tab.getAttribute("data-tab") === name);
  }
  labelRoot.hidden = name !== "label";
  dashRoot.hidden = name !== "dashboard";
}

document.addEventListener("keydown", (ev) => {
  if (activeTab() !== "label" || isTypingTarget(ev.target)) return;
  const action = actionForKey(ev.key);
  if (action) {
    ev.preventDefault();
    void decide(action);
  }
});

for (const tab of tabs) {
  tab.addEventListener("click", () => {
    showTab(tab.getAttribute("data-tab") ?? "label");
    if (activeTab() === "dashboard") void refreshDashboard();
  });
}

picker.addEventListener("change", () => void selectPair(picker.value));

async function boot(): Promise<void> {
  const pairs = await api.listPairs();
  renderPairPicker(picker, pairs);
  showTab("label");
  const first = pairs[0];
  if (first) {
    picker.value = first.id;
    await selectPair(first.id);
  } else {
    labelRoot.innerHTML =
      "<div class='banner'>No index pairs yet. Create one via the API or CLI.</div>";
  }
}

void boot();
