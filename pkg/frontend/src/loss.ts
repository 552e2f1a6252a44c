/**
 * Training objective: RMSE plus a Dice term on soft hotspot masks.
 *
 * The hotspot mask of a map is sigmoid((x - tau)/T) with tau defaulting to
 * 90% of the gold maximum, so the Dice term rewards agreement on the
 * near-worst-drop region while RMSE handles the bulk error. Both terms are
 * unit-agnostic: callers pick tau and T in whatever units the maps carry.
 */
import * as tf from "@tensorflow/tfjs";

export const DICE_EPS = 1e-6;

export interface LossOptions {
  /** Weight of the Dice term; 0 reduces the loss to pure RMSE. */
  diceLambda?: number;
  /** Soft-threshold temperature, same units as the maps. */
  diceTemp?: number;
  /** Hotspot threshold; defaults to 0.9 * max(gold). */
  tau?: number;
}

export interface LossTerms {
  total: tf.Scalar;
  rmse: tf.Scalar;
  dice: tf.Scalar;
  tau: number;
}

export function rmse(pred: tf.Tensor, gold: tf.Tensor): tf.Scalar {
  return pred.sub(gold).square().mean().sqrt() as tf.Scalar;
}

export function softHotspot(x: tf.Tensor, tau: number, temp: number): tf.Tensor {
  return x.sub(tau).div(temp).sigmoid();
}

export function diceLoss(p: tf.Tensor, q: tf.Tensor, eps = DICE_EPS): tf.Scalar {
  const overlap = p.mul(q).sum().mul(2);
  return tf.scalar(1).sub(overlap.div(p.sum().add(q.sum()).add(eps))) as tf.Scalar;
}

export function irDropLoss(pred: tf.Tensor, gold: tf.Tensor, opts: LossOptions = {}): LossTerms {
  const lambda = opts.diceLambda ?? 1.0;
  const temp = opts.diceTemp ?? 0.01;
  const tau = opts.tau ?? 0.9 * gold.max().dataSync()[0];
  return tf.tidy(() => {
    const err = rmse(pred, gold);
    const dice = diceLoss(softHotspot(pred, tau, temp), softHotspot(gold, tau, temp));
    const total = err.add(dice.mul(lambda)) as tf.Scalar;
    return { total, rmse: err, dice, tau };
  });
}
