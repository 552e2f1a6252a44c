/** Tensor assembly for exported feature stacks and golden maps. */
import * as tf from "@tensorflow/tfjs";
import { Grid, Stack } from "./formats.js";

export function gridToTensor(grid: Grid): tf.Tensor2D {
  return tf.tensor2d(grid.values, [grid.height, grid.width]);
}

export function tensorToGrid(t: tf.Tensor2D, units: string): Grid {
  const [height, width] = t.shape;
  return { width, height, values: new Float32Array(t.dataSync()), units };
}

/**
 * Stack manifest channels into a z-scored [C,H,W] tensor using the
 * native-resolution statistics recorded in the manifest.
 */
export function stackToTensor(stack: Stack): tf.Tensor3D {
  const c = stack.grids.length;
  const n = stack.width * stack.height;
  const data = new Float32Array(c * n);
  for (let i = 0; i < c; i++) {
    const { mean, std } = stack.entries[i];
    const scale = std > 0 ? 1 / std : 1;
    const src = stack.grids[i].values;
    for (let j = 0; j < n; j++) data[i * n + j] = (src[j] - mean) * scale;
  }
  return tf.tensor3d(data, [c, stack.height, stack.width]);
}

/** Center-aligned bilinear resize of a [C,H,W] tensor. */
export function resizeChannels(t: tf.Tensor3D, height: number, width: number): tf.Tensor3D {
  if (t.shape[1] === height && t.shape[2] === width) return t.clone();
  return tf.tidy(() => {
    const nhwc = t.expandDims(3).transpose([3, 1, 2, 0]) as tf.Tensor4D;
    const resized = tf.image.resizeBilinear(nhwc, [height, width], false, true);
    return resized.transpose([3, 1, 2, 0]).squeeze([3]) as tf.Tensor3D;
  });
}

export function resizeMap(t: tf.Tensor2D, height: number, width: number): tf.Tensor2D {
  if (t.shape[0] === height && t.shape[1] === width) return t.clone();
  return tf.tidy(() => {
    const nhwc = t.expandDims(0).expandDims(3) as tf.Tensor4D;
    const resized = tf.image.resizeBilinear(nhwc, [height, width], false, true);
    return resized.squeeze([0, 3]) as tf.Tensor2D;
  });
}
