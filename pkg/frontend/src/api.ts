import type {
  AuditEntry,
  JobRecord,
  LabelQueue,
  LabelRecord,
  MetricsReport,
  PairSummary,
  ResultsPage,
  StrategyStepSpec,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function check<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      detail = await response.text().catch(() => null);
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** Thin typed client over the service endpoints; no computation happens
 * here, every number shown in the UI comes straight from a response. */
export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async get<T>(path: string): Promise<T> {
    return check<T>(await fetch(this.url(path)));
  }

  private async send<T>(method: string, path: string, body: unknown): Promise<T> {
    return check<T>(
      await fetch(this.url(path), {
        method,
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  listPairs(): Promise<PairSummary[]> {
    return this.get("/pairs");
  }

  getPair(pairId: string): Promise<PairSummary> {
    return this.get(`/pairs/${pairId}`);
  }

  labelQueue(pairId: string, n: number): Promise<LabelQueue> {
    return this.get(`/pairs/${pairId}/labels/next?n=${n}`);
  }

  postLabel(
    pairId: string,
    sourceId: string,
    targetId: string,
    isDuplicate: boolean,
  ): Promise<LabelRecord> {
    return this.send("POST", `/pairs/${pairId}/labels`, {
      source_id: sourceId,
      target_id: targetId,
      is_duplicate: isDuplicate,
    });
  }

  labelCount(pairId: string): Promise<{ total: number; items: LabelRecord[] }> {
    return this.get(`/pairs/${pairId}/labels`);
  }

  metrics(pairId: string): Promise<MetricsReport> {
    return this.get(`/pairs/${pairId}/metrics`);
  }

  results(pairId: string, accepted?: boolean, limit = 1): Promise<ResultsPage> {
    const filter = accepted === undefined ? "" : `&accepted=${accepted}`;
    return this.get(`/pairs/${pairId}/results?limit=${limit}${filter}`);
  }

  startRun(pairId: string): Promise<{ job: string }> {
    return this.send("POST", `/pairs/${pairId}/runs`, {});
  }

  startStrategy(
    pairId: string,
    steps: StrategyStepSpec[],
    prefs?: { primary: string; secondary: string },
  ): Promise<{ job: string }> {
    return this.send("POST", `/pairs/${pairId}/strategies`, {
      steps,
      prefs: prefs ?? {},
    });
  }

  job(jobId: string): Promise<JobRecord> {
    return this.get(`/jobs/${jobId}`);
  }

  jobLog(jobId: string): Promise<{ entries: AuditEntry[] }> {
    return this.get(`/jobs/${jobId}/log`);
  }

  config(pairId: string): Promise<{ version: number; config: unknown }> {
    return this.get(`/pairs/${pairId}/config`);
  }
}
