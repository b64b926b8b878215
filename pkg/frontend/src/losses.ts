/**
 * Soft Dice loss with deep supervision: coarser heads are weighted half the
 * previous one and the weights renormalized to sum to 1; targets for the
 * coarser scales are 2x2 max-pooled labels (presence is preserved).
 */
import * as tf from '@tensorflow/tfjs';

const EPS = 1e-5;

export function diceLoss(pred: tf.Tensor, target: tf.Tensor): tf.Scalar {
  return tf.tidy(() => {
    const inter = tf.sum(tf.mul(pred, target));
    const denom = tf.add(tf.sum(pred), tf.sum(target));
    return tf.sub(1, tf.div(tf.add(tf.mul(inter, 2), EPS), tf.add(denom, EPS))) as tf.Scalar;
  });
}

export function supervisionWeights(heads: number): number[] {
  const raw = Array.from({ length: heads }, (_, i) => 0.5 ** i);
  const total = raw.reduce((a, b) => a + b, 0);
  return raw.map((w) => w / total);
}

export function deepSupervisionLoss(preds: tf.Tensor4D[], target: tf.Tensor4D,
                                    weights?: number[]): tf.Scalar {
  const w = weights ?? supervisionWeights(preds.length);
  if (w.length !== preds.length) {
    throw new Error(`${preds.length} heads but ${w.length} supervision weights`);
  }
  return tf.tidy(() => {
    let total: tf.Scalar = tf.scalar(0);
    let t = target;
    for (let i = 0; i < preds.length; i++) {
      if (i > 0) t = tf.maxPool(t, 2, 2, 'same');
      total = tf.add(total, tf.mul(diceLoss(preds[i], t), w[i])) as tf.Scalar;
    }
    return total;
  });
}

/** hard Dice of a thresholded prediction against a binary mask */
export function hardDice(predMask: Uint8Array, target: Float32Array): number {
  let inter = 0;
  let np = 0;
  let ng = 0;
  for (let i = 0; i < predMask.length; i++) {
    const p = predMask[i] ? 1 : 0;
    const g = target[i] > 0.5 ? 1 : 0;
    np += p;
    ng += g;
    if (p && g) inter++;
  }
  if (np + ng === 0) return 1.0;
  return (2 * inter) / (np + ng);
}
