/**
 * Command-line entry: `train` fits the regressor on manifest/golden-map
 * pairs exported by the feature toolkit; `predict` loads a checkpoint and
 * writes a volts prediction (SGRD + CSV) at the stack's native resolution.
 */
import * as path from "node:path";
import { parseArgs } from "node:util";
import * as tf from "@tensorflow/tfjs";
import { loadStack, readGrid, writeSgrd, writeCsvGrid, Grid } from "./formats.js";
import { gridToTensor, stackToTensor, resizeChannels, resizeMap, tensorToGrid } from "./data.js";
import { defaultModelConfig, IRDropModel, ModelConfig } from "./model.js";
import { defaultTrainConfig, loadCheckpoint, saveCheckpoint, train, Sample } from "./train.js";

const USAGE = `usage: irnet <command> [options]

commands:
  train    --manifest M --gold G [--manifest M2 --gold G2 ...]
           [--out model.json] [--steps N] [--lr X] [--seed S] [--batch B]
           [--size S] [--dims a,b,c,d] [--depths a,b,c,d] [--fpn F]
           [--dice-lambda L] [--dice-temp T] [--log-every K] [--quiet]
  predict  --manifest M --checkpoint model.json [--out DIR] [--stem pred]
`;

function intList(text: string, flag: string): number[] {
  const parts = text.split(",").map((s) => Number(s.trim()));
  if (parts.some((v) => !Number.isInteger(v) || v <= 0)) {
    throw new Error(`${flag} wants positive integers, got ${text}`);
  }
  return parts;
}

function loadSample(manifestPath: string, goldPath: string, size: number): Sample {
  const stack = loadStack(manifestPath);
  const gold = readGrid(goldPath);
  if (gold.width !== stack.width || gold.height !== stack.height) {
    throw new Error(
      `${goldPath}: golden map ${gold.width}x${gold.height} does not match stack ` +
        `${stack.width}x${stack.height}`,
    );
  }
  return tf.tidy(() => {
    const stackT = resizeChannels(stackToTensor(stack), size, size);
    const goldT = resizeMap(gridToTensor(gold), size, size);
    return { stack: stackT, gold: goldT };
  });
}

async function cmdTrain(args: string[]): Promise<number> {
  const { values } = parseArgs({
    args,
    options: {
      manifest: { type: "string", multiple: true },
      gold: { type: "string", multiple: true },
      out: { type: "string", default: "model.json" },
      steps: { type: "string", default: "500" },
      lr: { type: "string", default: "0.01" },
      seed: { type: "string", default: "0" },
      batch: { type: "string", default: "1" },
      size: { type: "string", default: "384" },
      dims: { type: "string", default: "32,64,128,256" },
      depths: { type: "string", default: "2,2,4,2" },
      fpn: { type: "string", default: "128" },
      "dice-lambda": { type: "string", default: "1" },
      "dice-temp": { type: "string", default: "0.01" },
      "log-every": { type: "string", default: "25" },
      quiet: { type: "boolean", default: false },
    },
  });
  const manifests = values.manifest ?? [];
  const golds = values.gold ?? [];
  if (manifests.length === 0 || manifests.length !== golds.length) {
    throw new Error("need matching --manifest/--gold pairs (at least one)");
  }
  const size = Number(values.size);
  const samples = manifests.map((m, i) => loadSample(m, golds[i], size));
  const channels = samples[0].stack.shape[0];
  samples.forEach((s, i) => {
    if (s.stack.shape[0] !== channels) {
      throw new Error(`${manifests[i]}: has ${s.stack.shape[0]} channels, expected ${channels}`);
    }
  });

  const modelCfg: ModelConfig = defaultModelConfig(channels, {
    stageDims: intList(values.dims!, "--dims"),
    stageDepths: intList(values.depths!, "--depths"),
    fpnDim: Number(values.fpn),
    inputSize: size,
  });
  const trainCfg = defaultTrainConfig({
    learningRate: Number(values.lr),
    steps: Number(values.steps),
    batchSize: Number(values.batch),
    diceLambda: Number(values["dice-lambda"]),
    diceTemp: Number(values["dice-temp"]),
    seed: Number(values.seed),
  });

  const logEvery = Math.max(1, Number(values["log-every"]));
  const t0 = Date.now();
  const result = await train(samples, modelCfg, trainCfg, (step, loss) => {
    if (!values.quiet && (step % logEvery === 0 || step === trainCfg.steps - 1)) {
      console.log(`step ${step}  loss ${loss.toExponential(4)}`);
    }
  });
  saveCheckpoint(values.out!, result.model, result.goldMean, result.goldStd);
  console.log(
    JSON.stringify({
      checkpoint: values.out,
      steps: trainCfg.steps,
      final_loss: result.lossHistory[result.lossHistory.length - 1],
      best_loss: result.bestLoss,
      best_step: result.bestStep,
      gold_mean_v: result.goldMean,
      gold_std_v: result.goldStd,
      seconds: (Date.now() - t0) / 1000,
    }),
  );
  result.model.dispose();
  samples.forEach((s) => {
    s.stack.dispose();
    s.gold.dispose();
  });
  return 0;
}

/** De-normalized volts prediction at the stack's native resolution. */
export function predictGrid(model: IRDropModel, goldMean: number, goldStd: number, manifestPath: string): Grid {
  const stack = loadStack(manifestPath);
  if (stack.grids.length !== model.cfg.inChannels) {
    throw new Error(
      `channel mismatch: manifest has ${stack.grids.length} channels, ` +
        `checkpoint expects ${model.cfg.inChannels}`,
    );
  }
  const pred = tf.tidy(() => {
    const input = resizeChannels(stackToTensor(stack), model.cfg.inputSize, model.cfg.inputSize);
    const predN = model.forward(input);
    const volts = predN.mul(goldStd).add(goldMean) as tf.Tensor2D;
    return resizeMap(volts, stack.height, stack.width);
  });
  const grid = tensorToGrid(pred, "volts");
  pred.dispose();
  return grid;
}

function cmdPredict(args: string[]): number {
  const { values } = parseArgs({
    args,
    options: {
      manifest: { type: "string" },
      checkpoint: { type: "string" },
      out: { type: "string", default: "." },
      stem: { type: "string", default: "pred" },
    },
  });
  if (!values.manifest || !values.checkpoint) {
    throw new Error("predict needs --manifest and --checkpoint");
  }
  const ckpt = loadCheckpoint(values.checkpoint);
  const grid = predictGrid(ckpt.model, ckpt.goldMean, ckpt.goldStd, values.manifest);
  const sgrdPath = path.join(values.out!, `${values.stem}.sgrd`);
  const csvPath = path.join(values.out!, `${values.stem}.csv`);
  writeSgrd(sgrdPath, grid);
  writeCsvGrid(csvPath, grid);
  console.log(JSON.stringify({ sgrd: sgrdPath, csv: csvPath, width: grid.width, height: grid.height }));
  ckpt.model.dispose();
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  await tf.setBackend("cpu");
  await tf.ready();
  const [command, ...rest] = argv;
  try {
    if (command === "train") return await cmdTrain(rest);
    if (command === "predict") return cmdPredict(rest);
    process.stderr.write(USAGE);
    return command === "--help" || command === "-h" ? 0 : 1;
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
