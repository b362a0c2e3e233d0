/**
 * External super-resolution adapter.
 *
 * Invoked by the harness as `node dist/main.js <job.json>`. The job
 * descriptor carries input_path, output_path, status_path, scale and params;
 * the adapter writes the upscaled image plus a status descriptor and exits 0,
 * or exits nonzero with the failure message in the status descriptor. Output
 * is staged and renamed, so a partial image is never visible with exit 0.
 *
 * params.mode:
 *   bicubic-echo (default)  separable bicubic, sample-compatible with the
 *                           harness built-in
 *   edsr                    residual-network inference; params.weights points
 *                           at a weight file (never downloaded)
 *   sleep | bad_dims | crash  deliberate misbehavior for harness
 *                           fault-injection tests
 */

import * as fs from "fs";
import * as path from "path";

import { loadWeights, forward } from "./edsr";
import { decodePng, encodePng16, Image } from "./png";
import { resizeBicubic } from "./resample";

interface Job {
  input_path: string;
  output_path: string;
  status_path: string;
  scale: number;
  params: Record<string, unknown>;
}

function writeStatus(job: Job | null, ok: boolean, message: string, wallTime: number): void {
  if (!job || !job.status_path) return;
  try {
    fs.writeFileSync(
      job.status_path,
      JSON.stringify({ ok, message, wall_time: wallTime }, null, 2) + "\n"
    );
  } catch {
    // the harness treats a missing status descriptor as a protocol error
  }
}

function runJob(job: Job): Image {
  const mode = String(job.params?.mode ?? "bicubic-echo");
  if (mode === "crash") {
    throw new Error("synthetic adapter crash (fault-injection mode)");
  }
  if (mode === "sleep") {
    const until = Date.now() + 3600_000;
    while (Date.now() < until) {
      /* burn wall clock until the harness times out */
    }
  }
  if (![2, 3, 4].includes(job.scale)) {
    throw new Error(`unsupported scale ${job.scale}`);
  }
  const input = decodePng(fs.readFileSync(job.input_path));
  let outH = input.height * job.scale;
  const outW = input.width * job.scale;
  if (mode === "bad_dims") {
    outH += 1; // deliberately violate the dims contract
    return resizeBicubic(input, outH, outW);
  }
  if (mode === "bicubic-echo" || mode === "bicubic") {
    return resizeBicubic(input, outH, outW);
  }
  if (mode === "edsr") {
    const weightsPath = job.params?.weights;
    if (typeof weightsPath !== "string" || weightsPath.length === 0) {
      throw new Error("edsr mode needs params.weights (path to a weight file)");
    }
    const store = loadWeights(fs.readFileSync(weightsPath));
    if (store.config.scale !== job.scale) {
      throw new Error(
        `weight file is for x${store.config.scale}, job requests x${job.scale}`
      );
    }
    return forward(store, input);
  }
  throw new Error(`unknown mode ${mode}`);
}

export function main(argv: string[]): number {
  const start = process.hrtime.bigint();
  let job: Job | null = null;
  const elapsed = () => Number(process.hrtime.bigint() - start) / 1e9;
  try {
    if (argv.length !== 1) {
      throw new Error("usage: main.js <job.json>");
    }
    job = JSON.parse(fs.readFileSync(argv[0], "utf8")) as Job;
    const output = runJob(job);
    const staged = job.output_path + ".part";
    fs.writeFileSync(staged, encodePng16(output));
    fs.renameSync(staged, job.output_path);
    writeStatus(job, true, "", elapsed());
    return 0;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    writeStatus(job, false, message, elapsed());
    process.stderr.write(`adapter error: ${message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
