import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface ServiceHandle {
  baseUrl: string;
  stop: () => Promise<void>;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        srv.close(() => reject(new Error("no port")));
      }
    });
  });
}

async function waitForReady(baseUrl: string, child: ChildProcess): Promise<void> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early with code ${child.exitCode}`);
    }
    try {
      const res = await fetch(`${baseUrl}/graphs`);
      if (res.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error("service did not become ready in 30s");
    }
    await new Promise((r) => setTimeout(r, 100));
  }
}

/** Spawn a real service instance on a fresh state directory. */
export async function startService(): Promise<ServiceHandle> {
  const stateDir = mkdtempSync(join(tmpdir(), "kgdedup-ui-test-"));
  const port = await freePort();
  const child = spawn(
    "python3",
    ["-m", "kgdedup.cli", "serve", "--state", stateDir, "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  try {
    await waitForReady(baseUrl, child);
  } catch (err) {
    child.kill("SIGKILL");
    throw new Error(`${err}\nservice stderr:\n${stderr}`);
  }
  return {
    baseUrl,
    stop: () =>
      new Promise((resolve) => {
        child.once("exit", () => resolve());
        child.kill("SIGTERM");
        setTimeout(() => child.kill("SIGKILL"), 3000).unref();
      }),
  };
}

const SCHEMA = "http://schema.org/";
const RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

function event(id: string, name: string, description: string, city: string): string {
  const s = `<http://ui.example/${id}>`;
  return [
    `${s} <${RDF_TYPE}> <${SCHEMA}Event> .`,
    `${s} <${SCHEMA}name> "${name}" .`,
    `${s} <${SCHEMA}description> "${description}" .`,
    `${s} <${SCHEMA}addressLocality> "${city}" .`,
  ].join("\n");
}

/** Three near-duplicate pairs with disjoint vocabularies, so the
 * pre-filter surfaces exactly those three candidate pairs. */
export const SEED_NTRIPLES = [
  event("e1", "Berlin Jazz Evening", "smooth quartet plays riverside stage", "Berlin"),
  event("e2", "berlin jazz evening", "smooth quartet plays riverside stage tonight", "Berlin"),
  event("e3", "Munich Craft Fair", "artisan woodwork pottery weekend market", "Munich"),
  event("e4", "Munich Craft Faire", "artisan woodwork pottery weekend market", "Munich"),
  event("e5", "Vienna Opera Gala", "celebrated soprano performs classical arias", "Vienna"),
  event("e6", "Vienna Opera Galla", "celebrated soprano performs classic arias", "Vienna"),
].join("\n");

async function post<T>(baseUrl: string, path: string, body: unknown): Promise<T> {
  const res = await fetch(`${baseUrl}${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    throw new Error(`${path} -> ${res.status}: ${await res.text()}`);
  }
  return (await res.json()) as T;
}

async function waitForJob(baseUrl: string, jobId: string): Promise<void> {
  const deadline = Date.now() + 120_000;
  for (;;) {
    const res = await fetch(`${baseUrl}/jobs/${jobId}`);
    const job = (await res.json()) as { status: string; error: string | null };
    if (job.status === "done") return;
    if (job.status === "failed") throw new Error(`job failed: ${job.error}`);
    if (Date.now() > deadline) throw new Error("job timed out");
    await new Promise((r) => setTimeout(r, 100));
  }
}

/** Ingest the seed graph, index it, create the self-join pair, and run
 * detection so the labelling queue has exactly three pairs. */
export async function seedPair(baseUrl: string): Promise<string> {
  const graph = await post<{ id: string }>(baseUrl, "/graphs", {
    name: "ui-seed",
    ntriples: SEED_NTRIPLES,
  });
  const index = await post<{ id: string }>(baseUrl, "/indices", {
    graph: graph.id,
    type_iri: `${SCHEMA}Event`,
  });
  const pair = await post<{ id: string }>(baseUrl, "/pairs", {
    source_index: index.id,
    target_index: index.id,
  });
  const run = await post<{ job: string }>(baseUrl, `/pairs/${pair.id}/runs`, {});
  await waitForJob(baseUrl, run.job);
  return pair.id;
}
