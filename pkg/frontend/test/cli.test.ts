import { afterEach, beforeAll, describe, expect, it } from "vitest";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { main } from "../src/cli.js";
import { readSgrd, writeSgrd, Grid } from "../src/formats.js";
import { makeOverfitSample } from "./helpers.js";

beforeAll(async () => {
  await tf.setBackend("cpu");
  await tf.ready();
});

afterEach(() => {
  tf.disposeVariables();
});

const TINY_FLAGS = ["--dims", "4,8,12,16", "--depths", "1,1,1,1", "--fpn", "8", "--size", "32"];

/** Write a 3-channel stack + golden map the trainer can consume. */
function writeFixture(dir: string): { manifest: string; gold: string } {
  const { size, gold, channels } = makeOverfitSample(32);
  const n = size * size;
  const names = ["pdn_density", "eff_distance", "hird_m1"];
  const lines: string[] = [];
  names.forEach((name, c) => {
    const values = channels.subarray(c * n, (c + 1) * n);
    const file = `features_${name}.sgrd`;
    const grid: Grid = { width: size, height: size, values: new Float32Array(values), units: "" };
    writeSgrd(path.join(dir, file), grid);
    let mean = 0;
    for (const v of values) mean += v;
    mean /= n;
    let sq = 0;
    for (const v of values) sq += (v - mean) * (v - mean);
    lines.push(`${name},${file},${mean},${Math.max(Math.sqrt(sq / n), 1e-12)}`);
  });
  const manifest = path.join(dir, "features_manifest.csv");
  fs.writeFileSync(manifest, lines.join("\n") + "\n");

  const goldPath = path.join(dir, "golden.sgrd");
  writeSgrd(goldPath, { width: size, height: size, values: gold, units: "volts" });
  return { manifest, gold: goldPath };
}

describe("cli", () => {
  it("prints usage for help and fails on unknown commands", async () => {
    expect(await main(["--help"])).toBe(0);
    expect(await main(["frobnicate"])).toBe(1);
    expect(await main([])).toBe(1);
  });

  it("trains, checkpoints, and predicts at the native resolution", async () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "irnet-"));
    const { manifest, gold } = writeFixture(dir);
    const ckpt = path.join(dir, "model.json");

    const trainCode = await main([
      "train",
      "--manifest", manifest,
      "--gold", gold,
      "--out", ckpt,
      "--steps", "3",
      "--lr", "0.005",
      "--seed", "1",
      "--quiet",
      ...TINY_FLAGS,
    ]);
    expect(trainCode).toBe(0);
    expect(fs.existsSync(ckpt)).toBe(true);

    const predCode = await main([
      "predict",
      "--manifest", manifest,
      "--checkpoint", ckpt,
      "--out", dir,
      "--stem", "pred",
    ]);
    expect(predCode).toBe(0);

    const pred = readSgrd(path.join(dir, "pred.sgrd"));
    expect(pred.width).toBe(32);
    expect(pred.height).toBe(32);
    expect(pred.units).toBe("volts");
    expect(Array.from(pred.values).every(Number.isFinite)).toBe(true);
    expect(fs.existsSync(path.join(dir, "pred.csv"))).toBe(true);

    // inference is deterministic under a fixed checkpoint
    const firstBytes = fs.readFileSync(path.join(dir, "pred.sgrd"));
    expect(await main(["predict", "--manifest", manifest, "--checkpoint", ckpt, "--out", dir])).toBe(0);
    expect(fs.readFileSync(path.join(dir, "pred.sgrd")).equals(firstBytes)).toBe(true);
  });

  it("rejects channel mismatches between manifest and checkpoint", async () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "irnet-"));
    const { manifest, gold } = writeFixture(dir);
    const ckpt = path.join(dir, "model.json");
    expect(
      await main([
        "train", "--manifest", manifest, "--gold", gold, "--out", ckpt,
        "--steps", "1", "--quiet", ...TINY_FLAGS,
      ]),
    ).toBe(0);

    // drop a channel from the manifest
    const lines = fs.readFileSync(manifest, "utf8").trim().split("\n");
    const reduced = path.join(dir, "reduced_manifest.csv");
    fs.writeFileSync(reduced, lines.slice(0, 2).join("\n") + "\n");
    expect(await main(["predict", "--manifest", reduced, "--checkpoint", ckpt, "--out", dir])).toBe(1);
  });

  it("rejects mismatched golden-map dimensions and missing flags", async () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "irnet-"));
    const { manifest } = writeFixture(dir);
    const wrongGold = path.join(dir, "wrong.sgrd");
    writeSgrd(wrongGold, { width: 16, height: 16, values: new Float32Array(256), units: "volts" });
    expect(
      await main(["train", "--manifest", manifest, "--gold", wrongGold, "--steps", "1", "--quiet", ...TINY_FLAGS]),
    ).toBe(1);
    expect(await main(["train", "--gold", wrongGold, "--steps", "1"])).toBe(1);
    expect(await main(["predict", "--manifest", manifest])).toBe(1);
  });
});
