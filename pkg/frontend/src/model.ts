/**
 * Convolutional IR-drop regressor.
 *
 * The network consumes a z-scored feature stack, appends coordinate
 * channels, and runs an encoder of depthwise-7x7 blocks with global
 * response normalization over four stages (strides 4/8/16/32). A feature
 * pyramid folds the stage outputs back to full resolution, where a 3x3
 * local-feature branch anchors the base level; a cascade of four
 * depthwise-7x7 + layer-norm + GELU blocks with a residual from the
 * pyramid base reconstructs the final one-channel drop map.
 *
 * Predictions are in normalized units; callers de-normalize with the
 * golden-map statistics stored alongside the weights.
 */
import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  /** Feature channels in the stack, before coordinate channels. */
  inChannels: number;
  stageDepths: number[];
  stageDims: number[];
  fpnDim: number;
  inputSize: number;
  mlpExpansion: number;
}

export const ENCODER_KERNEL = 7;
export const RECON_KERNEL = 7;
export const RECON_DEPTH = 4;
export const LOCAL_KERNEL = 3;
export const HEAD_KERNEL = 3;
const STEM_STRIDE = 4;
const NORM_EPS = 1e-6;

export function defaultModelConfig(
  inChannels: number,
  overrides: Partial<ModelConfig> = {},
): ModelConfig {
  return {
    inChannels,
    stageDepths: [2, 2, 4, 2],
    stageDims: [32, 64, 128, 256],
    fpnDim: 128,
    inputSize: 384,
    mlpExpansion: 4,
    ...overrides,
  };
}

export function validateModelConfig(cfg: ModelConfig): void {
  if (cfg.inChannels < 1) throw new Error("inChannels must be >= 1");
  if (cfg.stageDepths.length !== 4 || cfg.stageDims.length !== 4) {
    throw new Error("expected exactly 4 encoder stages");
  }
  if (cfg.stageDepths.some((d) => d < 1)) throw new Error("stage depths must be >= 1");
  for (let i = 1; i < cfg.stageDims.length; i++) {
    if (cfg.stageDims[i] <= cfg.stageDims[i - 1]) {
      throw new Error("stage dims must be ascending");
    }
  }
  if (cfg.fpnDim < 1) throw new Error("fpnDim must be >= 1");
  if (cfg.mlpExpansion < 1) throw new Error("mlpExpansion must be >= 1");
  if (cfg.inputSize < 32 || cfg.inputSize % 32 !== 0) {
    throw new Error("inputSize must be a positive multiple of 32");
  }
}

function coordRow(n: number): Float32Array {
  // single-sample convention: a 1-wide axis sits at -1
  const out = new Float32Array(n);
  if (n === 1) {
    out[0] = -1;
    return out;
  }
  for (let j = 0; j < n; j++) out[j] = -1 + (2 * j) / (n - 1);
  return out;
}

/**
 * Append normalized x and y coordinate channels to a [C,H,W] stack so the
 * corners map to (-1,-1) and (1,1).
 */
export function coordinateEncode(stack: tf.Tensor3D): tf.Tensor3D {
  const [, h, w] = stack.shape;
  return tf.tidy(() => {
    const xChan = tf.tensor1d(coordRow(w)).reshape([1, 1, w]).tile([1, h, 1]);
    const yChan = tf.tensor1d(coordRow(h)).reshape([1, h, 1]).tile([1, 1, w]);
    return tf.concat([stack, xChan, yChan], 0) as tf.Tensor3D;
  });
}

function gelu(x: tf.Tensor): tf.Tensor {
  return x.mul(x.div(Math.SQRT2).erf().add(1).mul(0.5));
}

function layerNorm(x: tf.Tensor, g: tf.Tensor, b: tf.Tensor): tf.Tensor {
  const mu = x.mean(-1, true);
  const xc = x.sub(mu);
  const variance = xc.square().mean(-1, true);
  return xc.div(variance.add(NORM_EPS).sqrt()).mul(g).add(b);
}

// global response normalization: spatial L2 per channel, divisive over channels
function grn(x: tf.Tensor, g: tf.Tensor, b: tf.Tensor): tf.Tensor {
  const gx = x.square().sum([1, 2], true).sqrt();
  const nx = gx.div(gx.mean(-1, true).add(NORM_EPS));
  return x.mul(nx).mul(g).add(b).add(x);
}

let instanceCounter = 0;

export class IRDropModel {
  readonly cfg: ModelConfig;
  private readonly prefix: string;
  private readonly vars = new Map<string, tf.Variable>();
  private seed: number;

  constructor(cfg: ModelConfig, seed = 0) {
    validateModelConfig(cfg);
    this.cfg = cfg;
    this.prefix = `irdrop${instanceCounter++}/`;
    this.seed = (seed >>> 0) + 1;
    this.build();
  }

  /** Trainable variables in creation order. */
  get variables(): tf.Variable[] {
    return [...this.vars.values()];
  }

  /** name -> variable, names stable across instances (no prefix). */
  namedVariables(): Map<string, tf.Variable> {
    return new Map(this.vars);
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose();
    this.vars.clear();
  }

  private v(name: string): tf.Variable {
    const got = this.vars.get(name);
    if (!got) throw new Error(`no such variable: ${name}`);
    return got;
  }

  private heNormal(name: string, shape: number[], fanIn: number): void {
    const init = tf.randomNormal(shape, 0, Math.sqrt(2 / fanIn), "float32", this.seed++);
    this.vars.set(name, tf.variable(init, true, this.prefix + name));
    init.dispose();
  }

  private fill(name: string, shape: number[], value: number): void {
    const init = value === 0 ? tf.zeros(shape) : tf.fill(shape, value);
    this.vars.set(name, tf.variable(init, true, this.prefix + name));
    init.dispose();
  }

  private build(): void {
    const { inChannels, stageDepths, stageDims, fpnDim, mlpExpansion } = this.cfg;
    const cin = inChannels + 2;
    const k = ENCODER_KERNEL;

    this.heNormal("stem/w", [STEM_STRIDE, STEM_STRIDE, cin, stageDims[0]], STEM_STRIDE * STEM_STRIDE * cin);
    this.fill("stem/b", [stageDims[0]], 0);
    this.fill("stem/ln/g", [stageDims[0]], 1);
    this.fill("stem/ln/b", [stageDims[0]], 0);

    for (let s = 0; s < 4; s++) {
      const c = stageDims[s];
      if (s > 0) {
        const prev = stageDims[s - 1];
        this.fill(`down${s}/ln/g`, [prev], 1);
        this.fill(`down${s}/ln/b`, [prev], 0);
        this.heNormal(`down${s}/w`, [2, 2, prev, c], 4 * prev);
        this.fill(`down${s}/b`, [c], 0);
      }
      const expanded = c * mlpExpansion;
      for (let j = 0; j < stageDepths[s]; j++) {
        const p = `enc${s}/blk${j}/`;
        this.heNormal(p + "dw/w", [k, k, c, 1], k * k);
        this.fill(p + "dw/b", [c], 0);
        this.fill(p + "ln/g", [c], 1);
        this.fill(p + "ln/b", [c], 0);
        this.heNormal(p + "pw1/w", [1, 1, c, expanded], c);
        this.fill(p + "pw1/b", [expanded], 0);
        this.fill(p + "grn/g", [expanded], 0);
        this.fill(p + "grn/b", [expanded], 0);
        this.heNormal(p + "pw2/w", [1, 1, expanded, c], expanded);
        this.fill(p + "pw2/b", [c], 0);
      }
    }

    for (let s = 0; s < 4; s++) {
      this.heNormal(`fpn/lat${s}/w`, [1, 1, stageDims[s], fpnDim], stageDims[s]);
      this.fill(`fpn/lat${s}/b`, [fpnDim], 0);
    }
    this.heNormal("local/w", [LOCAL_KERNEL, LOCAL_KERNEL, cin, fpnDim], LOCAL_KERNEL * LOCAL_KERNEL * cin);
    this.fill("local/b", [fpnDim], 0);

    const rk = RECON_KERNEL;
    for (let j = 0; j < RECON_DEPTH; j++) {
      const p = `recon/blk${j}/`;
      this.heNormal(p + "dw/w", [rk, rk, fpnDim, 1], rk * rk);
      this.fill(p + "dw/b", [fpnDim], 0);
      this.fill(p + "ln/g", [fpnDim], 1);
      this.fill(p + "ln/b", [fpnDim], 0);
    }
    this.heNormal("head/w", [HEAD_KERNEL, HEAD_KERNEL, fpnDim, 1], HEAD_KERNEL * HEAD_KERNEL * fpnDim);
    this.fill("head/b", [1], 0);
  }

  private encoderBlock(x: tf.Tensor4D, p: string): tf.Tensor4D {
    let y: tf.Tensor = tf
      .depthwiseConv2d(x, this.v(p + "dw/w") as tf.Tensor4D, 1, "same")
      .add(this.v(p + "dw/b"));
    y = layerNorm(y, this.v(p + "ln/g"), this.v(p + "ln/b"));
    y = tf.conv2d(y as tf.Tensor4D, this.v(p + "pw1/w") as tf.Tensor4D, 1, "same").add(this.v(p + "pw1/b"));
    y = gelu(y);
    y = grn(y, this.v(p + "grn/g"), this.v(p + "grn/b"));
    y = tf.conv2d(y as tf.Tensor4D, this.v(p + "pw2/w") as tf.Tensor4D, 1, "same").add(this.v(p + "pw2/b"));
    return x.add(y);
  }

  /** Stage outputs at strides 4, 8, 16 and 32 for an NHWC input. */
  encode(x4: tf.Tensor4D): tf.Tensor4D[] {
    const pyramid: tf.Tensor4D[] = [];
    let x: tf.Tensor4D = tf.conv2d(x4, this.v("stem/w") as tf.Tensor4D, STEM_STRIDE, "same").add(
      this.v("stem/b"),
    ) as tf.Tensor4D;
    x = layerNorm(x, this.v("stem/ln/g"), this.v("stem/ln/b")) as tf.Tensor4D;
    for (let s = 0; s < 4; s++) {
      if (s > 0) {
        x = layerNorm(x, this.v(`down${s}/ln/g`), this.v(`down${s}/ln/b`)) as tf.Tensor4D;
        x = tf.conv2d(x, this.v(`down${s}/w`) as tf.Tensor4D, 2, "same").add(this.v(`down${s}/b`)) as tf.Tensor4D;
      }
      for (let j = 0; j < this.cfg.stageDepths[s]; j++) {
        x = this.encoderBlock(x, `enc${s}/blk${j}/`);
      }
      pyramid.push(x);
    }
    return pyramid;
  }

  /**
   * Full forward pass on a [C,H,W] stack (H, W multiples of 32); returns
   * the normalized prediction as [H,W] plus the encoder pyramid.
   */
  forwardWithPyramid(stack: tf.Tensor3D): { pred: tf.Tensor2D; pyramid: tf.Tensor4D[] } {
    const [c, h, w] = stack.shape;
    if (c !== this.cfg.inChannels) {
      throw new Error(`channel mismatch: stack has ${c}, model expects ${this.cfg.inChannels}`);
    }
    if (h % 32 !== 0 || w % 32 !== 0) {
      throw new Error(`shape mismatch: ${h}x${w} is not a multiple of 32`);
    }
    return tf.tidy(() => {
      const x4 = coordinateEncode(stack).expandDims(0).transpose([0, 2, 3, 1]) as tf.Tensor4D;
      const pyramid = this.encode(x4);

      let top: tf.Tensor4D | null = null;
      for (let s = 3; s >= 0; s--) {
        const lat = tf
          .conv2d(pyramid[s], this.v(`fpn/lat${s}/w`) as tf.Tensor4D, 1, "same")
          .add(this.v(`fpn/lat${s}/b`)) as tf.Tensor4D;
        top =
          top === null
            ? lat
            : (lat.add(
                tf.image.resizeNearestNeighbor(top, [lat.shape[1], lat.shape[2]]),
              ) as tf.Tensor4D);
      }
      const local = tf
        .conv2d(x4, this.v("local/w") as tf.Tensor4D, 1, "same")
        .add(this.v("local/b")) as tf.Tensor4D;
      const base = local.add(tf.image.resizeNearestNeighbor(top!, [h, w])) as tf.Tensor4D;

      let y: tf.Tensor4D = base;
      for (let j = 0; j < RECON_DEPTH; j++) {
        const p = `recon/blk${j}/`;
        let z: tf.Tensor = tf
          .depthwiseConv2d(y, this.v(p + "dw/w") as tf.Tensor4D, 1, "same")
          .add(this.v(p + "dw/b"));
        z = layerNorm(z, this.v(p + "ln/g"), this.v(p + "ln/b"));
        y = gelu(z) as tf.Tensor4D;
      }
      y = y.add(base) as tf.Tensor4D;
      const pred = tf
        .conv2d(y, this.v("head/w") as tf.Tensor4D, 1, "same")
        .add(this.v("head/b"))
        .squeeze([0, 3]) as tf.Tensor2D;
      return { pred, pyramid };
    });
  }

  /** Normalized [H,W] prediction for a [C,H,W] stack. */
  forward(stack: tf.Tensor3D): tf.Tensor2D {
    return tf.tidy(() => {
      const { pred, pyramid } = this.forwardWithPyramid(stack);
      pyramid.forEach((t) => t.dispose());
      return pred;
    });
  }
}
