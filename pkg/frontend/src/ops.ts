/**
 * Training-capable building blocks for the wasm backend.
 *
 * The tfjs wasm backend ships forward kernels only for convolution's filter
 * gradient (`Conv2DBackpropFilter` is not registered), so `conv2dSame`
 * carries a custom gradient built from ops the backend does have:
 *   - d(input): conv2d with the spatially flipped, channel-transposed kernel
 *     (exact for stride 1 / same padding / odd kernels);
 *   - d(filter): conv2d with channels-as-batch (input transposed to
 *     (Cin, H+2p, W+2p, N), gradient as an (H, W, N, Cout) filter), which is
 *     several times faster here than an im2col matMul.
 *
 * Instance norm also gets a closed-form gradient: relying on autodiff would
 * keep every intermediate of the normalization chain alive for backprop,
 * which at batch-of-series scale costs hundreds of MB of wasm heap.
 */
import * as tf from '@tensorflow/tfjs';

export const conv2dSame: (x: tf.Tensor4D, k: tf.Tensor4D) => tf.Tensor4D =
  // tfjs' CustomGradientFunc typing does not model variadic saves well
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  tf.customGrad(((...args: any[]) => {
    const [x, k, save] = args as [tf.Tensor4D, tf.Tensor4D, tf.GradSaveFunc];
    if (k.shape[0] % 2 !== 1 || k.shape[0] !== k.shape[1]) {
      throw new Error(`conv2dSame needs odd square kernels, got ${k.shape}`);
    }
    save([x, k]);
    const value = tf.conv2d(x, k, 1, 'same');
    const gradFunc = (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
      const [xs, ks] = saved as [tf.Tensor4D, tf.Tensor4D];
      const kh = ks.shape[0];
      const p = (kh - 1) / 2;
      const dx = tf.tidy(() => {
        const kFlip = tf.transpose(tf.reverse(ks, [0, 1]), [0, 1, 3, 2]) as tf.Tensor4D;
        return tf.conv2d(dy, kFlip, 1, 'same');
      });
      const dk = tf.tidy(() => {
        const padded = p > 0
          ? tf.pad(xs, [[0, 0], [p, p], [p, p], [0, 0]])
          : xs;
        const inp = tf.transpose(padded, [3, 1, 2, 0]) as tf.Tensor4D;   // (Cin, H+2p, W+2p, N)
        const filt = tf.transpose(dy, [1, 2, 0, 3]) as tf.Tensor4D;      // (H, W, N, Cout)
        const out = tf.conv2d(inp, filt, 1, 'valid');                    // (Cin, kh, kw, Cout)
        return tf.transpose(out, [1, 2, 0, 3]);
      });
      return [dx, dk];
    };
    return { value, gradFunc };
    // eslint-disable-next-line @typescript-eslint/no-explicit-any
  }) as any);

export const instanceNorm: (x: tf.Tensor4D, gamma: tf.Variable | tf.Tensor1D,
                            beta: tf.Variable | tf.Tensor1D) => tf.Tensor4D =
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  tf.customGrad(((...args: any[]) => {
    const [x, gamma, beta, save] = args as [tf.Tensor4D, tf.Tensor1D, tf.Tensor1D, tf.GradSaveFunc];
    const eps = 1e-5;
    const [xhat, sigma] = tf.tidy(() => {
      const mean = tf.mean(x, [1, 2], true);
      const variance = tf.mean(tf.square(tf.sub(x, mean)), [1, 2], true);
      const sd = tf.sqrt(tf.add(variance, eps));
      return [tf.div(tf.sub(x, mean), sd), sd];
    });
    save([xhat, sigma as tf.Tensor4D, gamma]);
    const value = tf.add(tf.mul(xhat, gamma), beta);
    const gradFunc = (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
      const [xh, sd, g] = saved as [tf.Tensor4D, tf.Tensor4D, tf.Tensor1D];
      return tf.tidy(() => {
        const dGamma = tf.sum(tf.mul(dy, xh), [0, 1, 2]);
        const dBeta = tf.sum(dy, [0, 1, 2]);
        // per-(sample, channel) statistics over the spatial axes
        const dyMean = tf.mean(dy, [1, 2], true);
        const dyXhMean = tf.mean(tf.mul(dy, xh), [1, 2], true);
        const dx = tf.mul(tf.div(g, sd),
                          tf.sub(tf.sub(dy, dyMean), tf.mul(xh, dyXhMean)));
        return [dx, dGamma, dBeta];
      });
    };
    return { value, gradFunc };
    // eslint-disable-next-line @typescript-eslint/no-explicit-any
  }) as any);

/** nearest-neighbor x2 upsampling to an explicit target size */
export function upsampleTo(x: tf.Tensor4D, h: number, w: number): tf.Tensor4D {
  return tf.image.resizeNearestNeighbor(x, [h, w]);
}
