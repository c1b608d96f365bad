/**
 * Newline-delimited JSON serving loop: one request per stdin line, one
 * response per request id on stdout, errors in-band, clean exit on EOF.
 */
import * as readline from "node:readline";
import { Readable, Writable } from "node:stream";
import { EvaluationRequest, EvaluationResponse } from "./types.js";

export type RequestHandler = (req: EvaluationRequest) => Promise<EvaluationResponse>;

function bestEffortId(line: string): number {
  const match = /"id"\s*:\s*(-?\d+)/.exec(line);
  return match ? Number(match[1]) : -1;
}

export async function serveProtocol(
  input: Readable,
  output: Writable,
  handler: RequestHandler,
): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  const write = (res: EvaluationResponse) => {
    output.write(JSON.stringify(res) + "\n");
  };
  for await (const line of rl) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    let req: EvaluationRequest;
    try {
      req = JSON.parse(trimmed) as EvaluationRequest;
      if (typeof req.id !== "number") throw new Error("request without integer id");
    } catch (err) {
      write({ id: bestEffortId(trimmed), status: "error", message: String(err) });
      continue;
    }
    try {
      write(await handler(req));
    } catch (err) {
      // handler bugs and resource exhaustion stay in-band; the process lives on
      write({ id: req.id, status: "error", message: String(err) });
    }
  }
}
