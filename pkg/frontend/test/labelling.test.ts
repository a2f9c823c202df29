import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { actionForKey } from "../src/keyboard.js";
import { LabellingController } from "../src/labelling.js";
import { type ServiceHandle, seedPair, startService } from "./helpers.js";

let service: ServiceHandle;
let api: ApiClient;
let pairId: string;

beforeAll(async () => {
  service = await startService();
  api = new ApiClient(service.baseUrl);
  pairId = await seedPair(service.baseUrl);
}, 120_000);

afterAll(async () => {
  await service?.stop();
});

describe("keyboard mapping", () => {
  it("maps y/n/s and ignores everything else", () => {
    expect(actionForKey("y")).toBe("yes");
    expect(actionForKey("N")).toBe("no");
    expect(actionForKey("s")).toBe("skip");
    expect(actionForKey("x")).toBeNull();
    expect(actionForKey("Enter")).toBeNull();
  });
});

describe("labelling flow against the live service", () => {
  it("serves three queued pairs with both field tables", async () => {
    const controller = new LabellingController(api, pairId, 10);
    const state = await controller.refresh();
    expect(state.kind).toBe("ready");
    if (state.kind !== "ready") throw new Error("unreachable");
    expect(state.remaining).toBe(3);
    const card = state.card;
    expect(card.rows.length).toBeGreaterThan(0);
    const paths = card.rows.map((r) => r.path);
    expect(paths).toContain("name");
    // the card shows data returned by the API, nothing computed locally
    expect(card.similarity).toBeGreaterThan(0);
    expect(card.threshold).toBe(0.75);
  });

  it("skip rotates the queue without posting a label", async () => {
    const controller = new LabellingController(api, pairId, 10);
    await controller.refresh();
    const before = controller.current()?.source_id;
    const countBefore = (await api.labelCount(pairId)).total;
    const state = await controller.apply("skip");
    expect(state.kind).toBe("ready");
    expect(controller.current()?.source_id).not.toBe(before);
    expect((await api.labelCount(pairId)).total).toBe(countBefore);
  });

  it("three keyboard decisions each add a label, then the queue is empty", async () => {
    const controller = new LabellingController(api, pairId, 10);
    await controller.refresh();
    const decisions = ["y", "n", "y"] as const;
    for (const key of decisions) {
      const action = actionForKey(key);
      expect(action).not.toBeNull();
      const countBefore = (await api.labelCount(pairId)).total;
      await controller.apply(action!);
      const countAfter = (await api.labelCount(pairId)).total;
      expect(countAfter).toBe(countBefore + 1);
    }
    expect(controller.labelledThisSession).toBe(3);
    expect(controller.state.kind).toBe("empty");
    // the server agrees: everything surfaced is labelled now
    const queue = await api.labelQueue(pairId, 10);
    expect(queue.items).toHaveLength(0);
  });

  it("shows the locked state while a strategy is running", async () => {
    const start = await api.startStrategy(pairId, [
      { heuristic: "brute_force", target: "decision_threshold" },
      { heuristic: "brute_force", target: "prefilter_pct" },
      {
        heuristic: "genetic",
        target: "comparators",
        options: { population: 8, generations: 10, seed: 7 },
      },
    ]);
    const controller = new LabellingController(api, pairId, 10);
    const locked = await controller.refresh();
    expect(locked.kind).toBe("locked");
    if (locked.kind !== "locked") throw new Error("unreachable");
    expect(locked.status.state).toBe("running");

    // decisions are ignored while locked
    const still = await controller.apply("yes");
    expect(still.kind).toBe("locked");

    // wait for the job, then labelling works again
    const deadline = Date.now() + 120_000;
    for (;;) {
      const job = await api.job(start.job);
      if (job.status === "done" || job.status === "failed") {
        expect(job.status).toBe("done");
        break;
      }
      if (Date.now() > deadline) throw new Error("strategy did not finish");
      await new Promise((r) => setTimeout(r, 100));
    }
    const after = await controller.refresh();
    expect(after.kind === "ready" || after.kind === "empty").toBe(true);
  }, 150_000);
});
