/**
 * Training loop and single-file checkpoints.
 *
 * Gold maps arrive in volts and are z-scored with one mean/std pair shared
 * across the dataset; the model learns in that normalized space and the
 * stats ride along in the checkpoint so predictions can be mapped back to
 * volts. The hotspot threshold is still taken at 0.9 * max of each gold map
 * in volts and translated into normalized units, so the Dice term matches
 * the volt-space hotspot definition exactly.
 */
import * as fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { IRDropModel, ModelConfig, validateModelConfig } from "./model.js";
import { irDropLoss } from "./loss.js";

export interface TrainConfig {
  /** Peak Adam rate; warmup to it, hold, then cosine to ~0 (see lrSchedule). */
  learningRate: number;
  steps: number;
  batchSize: number;
  diceLambda: number;
  /** Volts. */
  diceTemp: number;
  seed: number;
  /** Stop early once a step's loss drops below this (optional). */
  stopAtLoss?: number;
}

export function defaultTrainConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  return {
    learningRate: 1e-2,
    steps: 500,
    batchSize: 1,
    diceLambda: 1.0,
    diceTemp: 0.01,
    seed: 0,
    ...overrides,
  };
}

export interface Sample {
  /** z-scored feature channels, [C,H,W]. */
  stack: tf.Tensor3D;
  /** Golden IR drop map in volts, [H,W]. */
  gold: tf.Tensor2D;
}

export interface TrainResult {
  model: IRDropModel;
  goldMean: number;
  goldStd: number;
  lossHistory: number[];
  bestLoss: number;
  bestStep: number;
}

const STD_FLOOR = 1e-12;

// Adam with a fast-adapting second moment: small overfit-style runs stall
// under the 0.999 default because v lags the rapidly shrinking gradients.
const ADAM_BETA1 = 0.9;
const ADAM_BETA2 = 0.99;
const ADAM_EPS = 1e-7;
// Linear warmup fraction of the step budget; He-init output starts far from
// the target scale and full-rate first steps can blow up before v warms up.
const WARMUP_FRAC = 0.05;
const HOLD_FRAC = 0.5;
const FLOOR_FRAC = 1e-3;
// Steps between event-loop yields; the CPU backend is synchronous and a
// multi-minute run would otherwise starve timers, stdio, and test-runner IPC.
const YIELD_EVERY = 10;

/** Warmup, hold at the peak, then cosine to a small floor. */
export function lrSchedule(step: number, totalSteps: number, peak: number): number {
  const warmupSteps = Math.max(1, Math.round(WARMUP_FRAC * totalSteps));
  if (step < warmupSteps) return (peak * (step + 1)) / warmupSteps;
  const t = step / totalSteps;
  if (t < HOLD_FRAC) return peak;
  const frac = 0.5 * (1 + Math.cos((Math.PI * (t - HOLD_FRAC)) / (1 - HOLD_FRAC)));
  return peak * Math.max(frac, FLOOR_FRAC);
}

function goldStats(samples: Sample[]): { mean: number; std: number } {
  let n = 0;
  let sum = 0;
  for (const s of samples) {
    const v = s.gold.dataSync();
    for (let i = 0; i < v.length; i++) sum += v[i];
    n += v.length;
  }
  const mean = sum / n;
  let sq = 0;
  for (const s of samples) {
    const v = s.gold.dataSync();
    for (let i = 0; i < v.length; i++) sq += (v[i] - mean) * (v[i] - mean);
  }
  return { mean, std: Math.max(Math.sqrt(sq / n), STD_FLOOR) };
}

export async function train(
  samples: Sample[],
  modelCfg: ModelConfig,
  cfg: TrainConfig,
  onStep?: (step: number, loss: number) => void,
): Promise<TrainResult> {
  if (samples.length === 0) throw new Error("empty dataset: need at least one sample");
  if (cfg.diceLambda < 0) throw new Error("diceLambda must be >= 0");
  if (cfg.diceTemp <= 0) throw new Error("diceTemp must be > 0");
  validateModelConfig(modelCfg);

  const { mean, std } = goldStats(samples);
  const prepared = samples.map((s) => {
    const tauVolts = 0.9 * (s.gold.max().dataSync()[0] as number);
    return {
      stack: s.stack,
      goldN: s.gold.sub(mean).div(std) as tf.Tensor2D,
      tauN: (tauVolts - mean) / std,
    };
  });
  const tempN = cfg.diceTemp / std;

  const model = new IRDropModel(modelCfg, cfg.seed);
  const optimizer = tf.train.adam(cfg.learningRate, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
  const history: number[] = [];
  let bestLoss = Infinity;
  let bestStep = -1;
  let bestWeights: Map<string, Float32Array> | null = null;

  try {
    for (let step = 0; step < cfg.steps; step++) {
      (optimizer as unknown as { learningRate: number }).learningRate = lrSchedule(
        step,
        cfg.steps,
        cfg.learningRate,
      );
      const batch: typeof prepared = [];
      for (let b = 0; b < Math.min(cfg.batchSize, prepared.length); b++) {
        batch.push(prepared[(step * cfg.batchSize + b) % prepared.length]);
      }
      const lossFn = (): tf.Scalar =>
        tf.tidy(() => {
          const terms = batch.map(
            (s) =>
              irDropLoss(model.forward(s.stack), s.goldN, {
                diceLambda: cfg.diceLambda,
                diceTemp: tempN,
                tau: s.tauN,
              }).total,
          );
          return tf.addN(terms).div(terms.length) as tf.Scalar;
        });
      const { value, grads } = tf.variableGrads(lossFn, model.variables);
      const loss = value.dataSync()[0];
      value.dispose();
      if (!Number.isFinite(loss)) {
        Object.values(grads).forEach((g) => g.dispose());
        throw new Error(
          `training diverged: non-finite loss at step ${step}` +
            (history.length ? ` (last finite loss ${history[history.length - 1]})` : ""),
        );
      }
      // snapshot before the update: these weights produced this loss
      if (loss < bestLoss) {
        bestLoss = loss;
        bestStep = step;
        bestWeights = new Map();
        for (const [name, v] of model.namedVariables()) {
          bestWeights.set(name, new Float32Array(v.dataSync() as Float32Array));
        }
      }
      optimizer.applyGradients(grads as unknown as Record<string, tf.Variable>);
      Object.values(grads).forEach((g) => g.dispose());
      history.push(loss);
      onStep?.(step, loss);
      if (cfg.stopAtLoss !== undefined && loss < cfg.stopAtLoss) break;
      if (step % YIELD_EVERY === YIELD_EVERY - 1) {
        await new Promise((resolve) => setImmediate(resolve));
      }
    }
  } finally {
    optimizer.dispose();
    prepared.forEach((s) => s.goldN.dispose());
  }

  if (bestWeights) {
    for (const [name, v] of model.namedVariables()) {
      const w = bestWeights.get(name)!;
      const t = tf.tensor(w, v.shape as number[]);
      v.assign(t);
      t.dispose();
    }
  }
  return { model, goldMean: mean, goldStd: std, lossHistory: history, bestLoss, bestStep };
}

interface CheckpointFile {
  formatVersion: number;
  config: ModelConfig;
  goldMean: number;
  goldStd: number;
  weights: { name: string; shape: number[]; data: string }[];
}

export interface Checkpoint {
  model: IRDropModel;
  config: ModelConfig;
  goldMean: number;
  goldStd: number;
}

export function saveCheckpoint(
  file: string,
  model: IRDropModel,
  goldMean: number,
  goldStd: number,
): void {
  const weights = [];
  for (const [name, v] of model.namedVariables()) {
    const data = v.dataSync() as Float32Array;
    weights.push({
      name,
      shape: v.shape as number[],
      data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
    });
  }
  const payload: CheckpointFile = {
    formatVersion: 1,
    config: model.cfg,
    goldMean,
    goldStd,
    weights,
  };
  fs.writeFileSync(file, JSON.stringify(payload));
}

export function loadCheckpoint(file: string): Checkpoint {
  const payload = JSON.parse(fs.readFileSync(file, "utf8")) as CheckpointFile;
  if (payload.formatVersion !== 1) {
    throw new Error(`${file}: unsupported checkpoint version ${payload.formatVersion}`);
  }
  const model = new IRDropModel(payload.config, 0);
  const vars = model.namedVariables();
  if (payload.weights.length !== vars.size) {
    throw new Error(`${file}: checkpoint has ${payload.weights.length} tensors, model needs ${vars.size}`);
  }
  for (const w of payload.weights) {
    const v = vars.get(w.name);
    if (!v) throw new Error(`${file}: unknown weight ${w.name}`);
    const raw = Buffer.from(w.data, "base64");
    const bytes = new Uint8Array(raw.length);
    bytes.set(raw);
    const t = tf.tensor(new Float32Array(bytes.buffer), w.shape);
    v.assign(t);
    t.dispose();
  }
  return { model, config: payload.config, goldMean: payload.goldMean, goldStd: payload.goldStd };
}
