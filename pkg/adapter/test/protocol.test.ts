import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { main } from "../src/main";
import { decodePng } from "../src/png";

const FIXTURES = path.join(__dirname, "fixtures");

let workspace: string;

beforeEach(() => {
  workspace = fs.mkdtempSync(path.join(os.tmpdir(), "adapter-test-"));
});

afterEach(() => {
  fs.rmSync(workspace, { recursive: true, force: true });
});

function writeJob(overrides: Record<string, unknown> = {}): string {
  const job = {
    input_path: path.join(FIXTURES, "input.png"),
    output_path: path.join(workspace, "output.png"),
    status_path: path.join(workspace, "status.json"),
    scale: 2,
    params: {},
    ...overrides,
  };
  const jobPath = path.join(workspace, "job.json");
  fs.writeFileSync(jobPath, JSON.stringify(job));
  return jobPath;
}

function readStatus(): { ok: boolean; message: string; wall_time: number } {
  return JSON.parse(fs.readFileSync(path.join(workspace, "status.json"), "utf8"));
}

describe("serve job", () => {
  it("writes output, status and exits 0 on success", () => {
    const code = main([writeJob()]);
    expect(code).toBe(0);
    const status = readStatus();
    expect(status.ok).toBe(true);
    expect(status.wall_time).toBeGreaterThanOrEqual(0);
    const out = decodePng(fs.readFileSync(path.join(workspace, "output.png")));
    expect(out.width).toBe(20);
    expect(out.height).toBe(24);
  });

  it("is byte-deterministic in bicubic-echo mode", () => {
    main([writeJob()]);
    const first = fs.readFileSync(path.join(workspace, "output.png"));
    main([writeJob()]);
    const second = fs.readFileSync(path.join(workspace, "output.png"));
    expect(first.equals(second)).toBe(true);
  });

  it("runs edsr mode from a weight file", () => {
    const code = main([
      writeJob({ params: { mode: "edsr", weights: path.join(FIXTURES, "weights_x2.bin") } }),
    ]);
    expect(code).toBe(0);
    const out = decodePng(fs.readFileSync(path.join(workspace, "output.png")));
    expect(out.width).toBe(20);
    expect(out.height).toBe(24);
  });

  it("never leaves output with exit nonzero", () => {
    const code = main([writeJob({ input_path: path.join(workspace, "absent.png") })]);
    expect(code).toBe(1);
    expect(fs.existsSync(path.join(workspace, "output.png"))).toBe(false);
    const status = readStatus();
    expect(status.ok).toBe(false);
    expect(status.message.length).toBeGreaterThan(0);
  });

  it("fails on an edsr scale mismatch", () => {
    const code = main([
      writeJob({
        scale: 3,
        params: { mode: "edsr", weights: path.join(FIXTURES, "weights_x2.bin") },
      }),
    ]);
    expect(code).toBe(1);
    expect(readStatus().message).toMatch(/x2/);
  });

  it("fails on an unknown mode", () => {
    const code = main([writeJob({ params: { mode: "telepathy" } })]);
    expect(code).toBe(1);
    expect(readStatus().message).toMatch(/unknown mode/);
  });

  it("fails on an unsupported scale", () => {
    expect(main([writeJob({ scale: 7 })])).toBe(1);
  });

  it("fails on a malformed job descriptor", () => {
    const jobPath = path.join(workspace, "job.json");
    fs.writeFileSync(jobPath, "{nope");
    expect(main([jobPath])).toBe(1);
  });

  it("crash mode exits nonzero with a message", () => {
    const code = main([writeJob({ params: { mode: "crash" } })]);
    expect(code).toBe(1);
    expect(readStatus().message).toMatch(/crash/);
  });

  it("bad_dims mode violates the dims contract on purpose", () => {
    const code = main([writeJob({ params: { mode: "bad_dims" } })]);
    expect(code).toBe(0);
    const out = decodePng(fs.readFileSync(path.join(workspace, "output.png")));
    expect(out.height).toBe(25); // 24 + 1, for the harness-side fault test
  });
});
