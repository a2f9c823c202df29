import { ApiClient, ApiError } from "./api.js";
import type { LabelAction } from "./keyboard.js";
import type { FieldTable, QueueItem, StrategyStatus } from "./types.js";

/** View model for one side-by-side pair card. Every number comes from the
 * API response; the UI never computes similarity itself. */
export interface PairCard {
  sourceId: string;
  targetId: string;
  similarity: number;
  accepted: boolean;
  threshold: number;
  rows: CardRow[];
}

export interface CardRow {
  path: string;
  sourceValues: string[];
  targetValues: string[];
  similarity: number | null;
}

export type LabellingState =
  | { kind: "loading" }
  | { kind: "ready"; card: PairCard; remaining: number }
  | { kind: "empty" }
  | { kind: "locked"; status: StrategyStatus }
  | { kind: "error"; message: string };

function renderValue(v: FieldTable[string][number]): string {
  if (typeof v === "object" && v !== null && "@id" in v) {
    return v["@id"];
  }
  return String(v);
}

export function buildCard(item: QueueItem, threshold: number): PairCard {
  const paths = new Set<string>([
    ...Object.keys(item.source_fields),
    ...Object.keys(item.target_fields),
  ]);
  const rows: CardRow[] = [...paths].sort().map((path) => ({
    path,
    sourceValues: (item.source_fields[path] ?? []).map(renderValue),
    targetValues: (item.target_fields[path] ?? []).map(renderValue),
    similarity: item.per_path[path] ?? null,
  }));
  return {
    sourceId: item.source_id,
    targetId: item.target_id,
    similarity: item.similarity,
    accepted: item.accepted,
    threshold,
    rows,
  };
}

/** Queue-driven labelling flow: fetch the next uncertain pairs, record
 * duplicate / not-duplicate decisions, advance, and surface the locked
 * state while a strategy job owns the training data. */
export class LabellingController {
  state: LabellingState = { kind: "loading" };
  labelledThisSession = 0;

  private queue: QueueItem[] = [];
  private threshold = 0;

  constructor(
    private api: ApiClient,
    private pairId: string,
    private batchSize = 10,
  ) {}

  current(): QueueItem | null {
    return this.queue[0] ?? null;
  }

  async refresh(): Promise<LabellingState> {
    this.state = { kind: "loading" };
    try {
      const queue = await this.api.labelQueue(this.pairId, this.batchSize);
      this.queue = queue.items;
      this.threshold = queue.threshold;
      this.state = this.presentState();
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        const pair = await this.api.getPair(this.pairId);
        this.queue = [];
        this.state = { kind: "locked", status: pair.strategy_status };
      } else {
        this.state = { kind: "error", message: String(err) };
      }
    }
    return this.state;
  }

  private presentState(): LabellingState {
    const head = this.queue[0];
    if (!head) {
      return { kind: "empty" };
    }
    return {
      kind: "ready",
      card: buildCard(head, this.threshold),
      remaining: this.queue.length,
    };
  }

  /** Apply a keyboard action to the current card. Returns the new state;
   * decisions post to the server before the queue advances. */
  async apply(action: LabelAction): Promise<LabellingState> {
    const head = this.queue[0];
    if (!head || this.state.kind === "locked") {
      return this.state;
    }
    if (action === "skip") {
      this.queue.push(this.queue.shift() as QueueItem);
      this.state = this.presentState();
      return this.state;
    }
    await this.api.postLabel(
      this.pairId,
      head.source_id,
      head.target_id,
      action === "yes",
    );
    this.labelledThisSession += 1;
    this.queue.shift();
    if (this.queue.length === 0) {
      return this.refresh();
    }
    this.state = this.presentState();
    return this.state;
  }
}
