/**
 * 2D encoder-decoder segmentation network with skip connections:
 * 5 resolution levels, base width 32 (doubling per level), two
 * conv3x3 + instance norm + leaky ReLU blocks per level, nearest-neighbor
 * upsampling in the decoder, and sigmoid deep-supervision heads at the
 * 3 finest decoder scales. Fully convolutional: any input size divisible
 * by 2^(levels-1) keeps its spatial shape.
 */
import * as tf from '@tensorflow/tfjs';
import { conv2dSame, instanceNorm, upsampleTo } from './ops';
import { Rng } from './rng';

export interface Arch {
  levels: number;      // resolution levels (default 5)
  baseWidth: number;   // channels at the finest level (default 32)
  inChannels: number;  // input image channels (default 1)
  heads: number;       // deep-supervision heads at the finest scales (default 3)
}

export const DEFAULT_ARCH: Arch = { levels: 5, baseWidth: 32, inChannels: 1, heads: 3 };

export interface ParamSpec {
  name: string;
  shape: number[];
}

let instanceCounter = 0;

export class SegNet2D {
  readonly arch: Arch;
  readonly params: Map<string, tf.Variable> = new Map();
  /** tfjs registers variable names globally; prefix per instance */
  private readonly scope: string;

  constructor(arch: Arch = DEFAULT_ARCH) {
    if (arch.heads > arch.levels - 1) {
      throw new Error(`${arch.heads} heads need at least ${arch.heads + 1} levels`);
    }
    this.arch = arch;
    this.scope = `segnet${instanceCounter++}`;
  }

  private widths(): number[] {
    return Array.from({ length: this.arch.levels },
                      (_, i) => this.arch.baseWidth * 2 ** i);
  }

  /** declaration order defines the checkpoint layout */
  paramSpecs(): ParamSpec[] {
    const specs: ParamSpec[] = [];
    const w = this.widths();
    const block = (name: string, cin: number, cout: number) => {
      specs.push({ name: `${name}/kernel`, shape: [3, 3, cin, cout] });
      specs.push({ name: `${name}/bias`, shape: [cout] });
      specs.push({ name: `${name}/gamma`, shape: [cout] });
      specs.push({ name: `${name}/beta`, shape: [cout] });
    };
    let cin = this.arch.inChannels;
    for (let lvl = 0; lvl < this.arch.levels; lvl++) {
      block(`enc${lvl}/a`, cin, w[lvl]);
      block(`enc${lvl}/b`, w[lvl], w[lvl]);
      cin = w[lvl];
    }
    for (let lvl = this.arch.levels - 2; lvl >= 0; lvl--) {
      block(`dec${lvl}/a`, w[lvl + 1] + w[lvl], w[lvl]);
      block(`dec${lvl}/b`, w[lvl], w[lvl]);
    }
    for (let h = 0; h < this.arch.heads; h++) {
      specs.push({ name: `head${h}/kernel`, shape: [1, 1, w[h], 1] });
      specs.push({ name: `head${h}/bias`, shape: [1] });
    }
    return specs;
  }

  /** He-uniform kernels, zero biases, unit gammas; deterministic in the seed */
  init(seed: number): void {
    const rng = new Rng(seed);
    for (const spec of this.paramSpecs()) {
      let values: Float32Array;
      const n = spec.shape.reduce((a, b) => a * b, 1);
      if (spec.name.endsWith('/kernel')) {
        const fanIn = spec.shape.length === 4
          ? spec.shape[0] * spec.shape[1] * spec.shape[2]
          : spec.shape[0];
        const limit = Math.sqrt(6 / fanIn);
        values = new Float32Array(n);
        for (let i = 0; i < n; i++) values[i] = rng.uniform(-limit, limit);
      } else if (spec.name.endsWith('/gamma')) {
        values = new Float32Array(n).fill(1);
      } else {
        values = new Float32Array(n);
      }
      this.params.set(spec.name,
                      tf.variable(tf.tensor(values, spec.shape), true,
                                  `${this.scope}/${spec.name}`));
    }
  }

  setWeights(weights: Map<string, Float32Array>): void {
    for (const spec of this.paramSpecs()) {
      const data = weights.get(spec.name);
      if (!data) throw new Error(`checkpoint is missing weight ${spec.name}`);
      this.params.set(spec.name,
                      tf.variable(tf.tensor(data, spec.shape), true,
                                  `${this.scope}/${spec.name}`));
    }
  }

  trainableVariables(): tf.Variable[] {
    return [...this.params.values()];
  }

  dispose(): void {
    for (const v of this.params.values()) v.dispose();
    this.params.clear();
  }

  private p(name: string): tf.Variable {
    const v = this.params.get(name);
    if (!v) throw new Error(`parameter ${name} not initialized`);
    return v;
  }

  private k4(name: string): tf.Tensor4D {
    return this.p(name) as unknown as tf.Tensor4D;
  }

  private convBlock(name: string, x: tf.Tensor4D): tf.Tensor4D {
    const y = tf.add(conv2dSame(x, this.k4(`${name}/kernel`)), this.p(`${name}/bias`)) as tf.Tensor4D;
    const normed = instanceNorm(y, this.p(`${name}/gamma`), this.p(`${name}/beta`)) as tf.Tensor4D;
    return tf.leakyRelu(normed, 0.01);
  }

  /**
   * Forward pass. Returns per-pixel foreground probabilities at the
   * deep-supervision scales, finest first: shapes (N, H, W, 1),
   * (N, H/2, W/2, 1), (N, H/4, W/4, 1) for the default 3 heads.
   */
  forward(x: tf.Tensor4D): tf.Tensor4D[] {
    const down = 2 ** (this.arch.levels - 1);
    if (x.shape[1] % down !== 0 || x.shape[2] % down !== 0) {
      throw new Error(`input size ${x.shape[1]}x${x.shape[2]} not divisible by ${down}`);
    }
    const skips: tf.Tensor4D[] = [];
    let h = x;
    for (let lvl = 0; lvl < this.arch.levels; lvl++) {
      if (lvl > 0) h = tf.maxPool(h, 2, 2, 'same');
      h = this.convBlock(`enc${lvl}/a`, h);
      h = this.convBlock(`enc${lvl}/b`, h);
      skips.push(h);
    }
    const decoded: tf.Tensor4D[] = new Array(this.arch.levels - 1);
    for (let lvl = this.arch.levels - 2; lvl >= 0; lvl--) {
      const skip = skips[lvl];
      const up = upsampleTo(h, skip.shape[1], skip.shape[2]);
      h = tf.concat([up, skip], 3) as tf.Tensor4D;
      h = this.convBlock(`dec${lvl}/a`, h);
      h = this.convBlock(`dec${lvl}/b`, h);
      decoded[lvl] = h;
    }
    const outputs: tf.Tensor4D[] = [];
    for (let head = 0; head < this.arch.heads; head++) {
      const logits = tf.add(conv2dSame(decoded[head], this.k4(`head${head}/kernel`)),
                            this.p(`head${head}/bias`)) as tf.Tensor4D;
      outputs.push(tf.sigmoid(logits));
    }
    return outputs;
  }

  /** finest-scale probabilities only (inference path) */
  predict(x: tf.Tensor4D): tf.Tensor4D {
    return tf.tidy(() => {
      const outs = this.forward(x);
      for (let i = 1; i < outs.length; i++) outs[i].dispose();
      return outs[0];
    });
  }
}
