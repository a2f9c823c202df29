import { ApiClient } from "./api.js";
import type {
  AuditEntry,
  JobRecord,
  MetricsReport,
  PairSummary,
  StrategyStepSpec,
} from "./types.js";

/** Everything the dashboard screen shows, verbatim from API responses. */
export interface DashboardModel {
  pair: PairSummary;
  metrics: MetricsReport;
  degenerateWarning: boolean;
  acceptedTotal: number;
  scoredTotal: number;
  configVersion: number;
}

export interface StrategyRun {
  jobId: string;
  job: JobRecord;
  audit: AuditEntry[];
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class DashboardController {
  constructor(
    private api: ApiClient,
    private pairId: string,
  ) {}

  async load(): Promise<DashboardModel> {
    const [pair, metrics, accepted, scored] = await Promise.all([
      this.api.getPair(this.pairId),
      this.api.metrics(this.pairId),
      this.api.results(this.pairId, true, 1),
      this.api.results(this.pairId, undefined, 1),
    ]);
    return {
      pair,
      metrics,
      degenerateWarning: metrics.degenerate,
      acceptedTotal: accepted.total,
      scoredTotal: scored.total,
      configVersion: pair.config_version,
    };
  }

  async submitStrategy(
    steps: StrategyStepSpec[],
    prefs?: { primary: string; secondary: string },
  ): Promise<{ job: string }> {
    return this.api.startStrategy(this.pairId, steps, prefs);
  }

  /** Poll a job until it finishes, reporting status along the way. */
  async watchJob(
    jobId: string,
    onStatus?: (job: JobRecord, pair: PairSummary) => void,
    intervalMs = 250,
    timeoutMs = 300_000,
  ): Promise<StrategyRun> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const [job, pair] = await Promise.all([
        this.api.job(jobId),
        this.api.getPair(this.pairId),
      ]);
      onStatus?.(job, pair);
      if (job.status === "done" || job.status === "failed") {
        const log = await this.api.jobLog(jobId);
        return { jobId, job, audit: log.entries };
      }
      if (Date.now() > deadline) {
        throw new Error(`job ${jobId} did not finish within ${timeoutMs}ms`);
      }
      await sleep(intervalMs);
    }
  }
}
