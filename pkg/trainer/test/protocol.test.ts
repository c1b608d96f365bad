import { spawn } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { EvaluationResponse } from "../src/types.js";

const FIXTURES = path.join(path.dirname(fileURLToPath(import.meta.url)), "fixtures");
const MAIN = path.join(path.dirname(fileURLToPath(import.meta.url)), "..", "dist", "main.js");

interface RunOutcome {
  code: number;
  lines: string[];
  responses: EvaluationResponse[];
}

function runAdapter(stdinText: string, extraArgs: string[] = []): Promise<RunOutcome> {
  return new Promise((resolve, reject) => {
    const child = spawn(
      process.execPath,
      [MAIN, "--synthetic", "--train-limit", "64", "--test-limit", "64", ...extraArgs],
      { stdio: ["pipe", "pipe", "inherit"] },
    );
    let stdout = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.on("error", reject);
    child.on("close", (code) => {
      const lines = stdout.split("\n").filter((l) => l.trim().length > 0);
      resolve({
        code: code ?? -1,
        lines,
        responses: lines.map((l) => JSON.parse(l) as EvaluationResponse),
      });
    });
    child.stdin.write(stdinText);
    child.stdin.end();
  });
}

const recorded = fs.readFileSync(path.join(FIXTURES, "requests.ndjson"), "utf8");

describe("wire protocol", () => {
  it("answers every recorded request id exactly once, exits 0 at EOF", async () => {
    const outcome = await runAdapter(recorded);
    expect(outcome.code).toBe(0);
    const ids = outcome.responses.map((r) => r.id).sort();
    expect(ids).toEqual([0, 1, 2]);
    for (const res of outcome.responses) {
      expect(res.status).toBe("ok");
      expect(res.accuracy).toBeGreaterThanOrEqual(0);
      expect(res.accuracy).toBeLessThanOrEqual(1);
      expect(res.message).toMatch(/split=test/);
      expect(res.message).toMatch(/dataset=synthetic/);
    }
  }, 120000);

  it("one JSON document per line, no pretty-printing", async () => {
    const outcome = await runAdapter(recorded);
    for (const line of outcome.lines) {
      expect(() => JSON.parse(line)).not.toThrow();
      expect(line).not.toMatch(/^\s/);
    }
  }, 120000);

  it("reports malformed lines in-band with a best-effort id and keeps serving", async () => {
    const requests = recorded.trim().split("\n");
    const stdin = [requests[0], 'this is {not json "id": 41', requests[1]].join("\n") + "\n";
    const outcome = await runAdapter(stdin);
    expect(outcome.code).toBe(0);
    const byId = new Map(outcome.responses.map((r) => [r.id, r]));
    expect(byId.get(41)?.status).toBe("error");
    expect(byId.get(0)?.status).toBe("ok");
    expect(byId.get(1)?.status).toBe("ok"); // the process survived the bad line
  }, 120000);

  it("turns corrupted architectures into error responses, process stays alive", async () => {
    const requests = recorded.trim().split("\n");
    const broken = JSON.parse(requests[0]);
    broken.id = 99;
    broken.architecture.graph.nodes[2].inputs = "corrupted";
    const stdin = [JSON.stringify(broken), requests[1]].join("\n") + "\n";
    const outcome = await runAdapter(stdin);
    expect(outcome.code).toBe(0);
    const byId = new Map(outcome.responses.map((r) => [r.id, r]));
    expect(byId.get(99)?.status).toBe("error");
    expect(byId.get(99)?.message).toMatch(/inputs/);
    expect(byId.get(1)?.status).toBe("ok");
  }, 120000);

  it("exits 0 immediately on empty stdin", async () => {
    const outcome = await runAdapter("");
    expect(outcome.code).toBe(0);
    expect(outcome.responses).toEqual([]);
  }, 60000);
});
