/**
 * Training loop: every iteration feeds one complete series (a virtual sweep)
 * as the batch, optimized with Nesterov-momentum SGD under a polynomial
 * learning-rate decay, Dice loss with deep supervision, and the augmentation
 * pipeline. Deterministic under the seed up to backend floating-point
 * reassociation.
 */
import * as tf from '@tensorflow/tfjs';
import { AugmentConfig, DEFAULT_AUGMENT, augmentSeries } from './augment';
import { initBackend } from './backend';
import { saveCheckpoint } from './checkpoint';
import { Series, downscaleSeries, loadManifest, loadSeries } from './data';
import { deepSupervisionLoss, hardDice, supervisionWeights } from './losses';
import { DEFAULT_ARCH, SegNet2D } from './model';
import { Rng, streamSeed } from './rng';
import { polyLr } from './schedule';

export interface TrainConfig {
  datasetDir: string;
  checkpointDir: string;
  epochs: number;            // default 100
  initialLr: number;         // default 0.01
  momentum: number;          // default 0.9, Nesterov
  polyExponent: number;      // default 0.9
  dsWeights?: number[];      // default: halved per coarser scale, renormalized
  augment: AugmentConfig;
  seed: number;
  /** train at a lower resolution (integer divisor of the native size);
      inference stays fully convolutional at the native resolution */
  trainResolution?: number;
  levels: number;
  baseWidth: number;
}

export const DEFAULT_TRAIN: Omit<TrainConfig, 'datasetDir' | 'checkpointDir'> = {
  epochs: 100,
  initialLr: 0.01,
  momentum: 0.9,
  polyExponent: 0.9,
  augment: DEFAULT_AUGMENT,
  seed: 0,
  levels: DEFAULT_ARCH.levels,
  baseWidth: DEFAULT_ARCH.baseWidth,
};

export interface TrainHistory {
  epochLoss: number[];
  learningRates: number[];
  heldInDice: number;
  backend: string;
  wallSeconds: number;
}

function toTensors(s: Series): { x: tf.Tensor4D; y: tf.Tensor4D } {
  const x = tf.tensor4d(s.images, [s.frames, s.height, s.width, 1]);
  const y = tf.tensor4d(s.labels, [s.frames, s.height, s.width, 1]);
  return { x, y };
}

/** mean hard Dice of thresholded predictions over a series, frame-averaged
    via global pixel counts (the overfit sanity metric) */
export function evaluateSeriesDice(model: SegNet2D, s: Series, batch = 8): number {
  const n = s.height * s.width;
  const mask = new Uint8Array(s.frames * n);
  for (let f0 = 0; f0 < s.frames; f0 += batch) {
    const f1 = Math.min(f0 + batch, s.frames);
    const probs = tf.tidy(() => {
      const x = tf.tensor4d(s.images.subarray(f0 * n, f1 * n),
                            [f1 - f0, s.height, s.width, 1]);
      return model.predict(x);
    });
    const data = probs.dataSync() as Float32Array;
    probs.dispose();
    for (let i = 0; i < data.length; i++) mask[f0 * n + i] = data[i] >= 0.5 ? 1 : 0;
  }
  return hardDice(mask, s.labels);
}

export async function train(config: TrainConfig,
                            log: (msg: string) => void = (m) => process.stderr.write(m + '\n')):
    Promise<TrainHistory> {
  const backend = await initBackend();
  const t0 = Date.now();

  const manifest = loadManifest(config.datasetDir);
  log(`dataset ${config.datasetDir}: case ${manifest.case_id}, ${manifest.records.length} series`);
  const native: Series[] = manifest.records.map((rec) => loadSeries(config.datasetDir, rec));
  let seriesList = native;
  if (config.trainResolution && config.trainResolution !== native[0].width) {
    const factor = native[0].width / config.trainResolution;
    if (!Number.isInteger(factor) || factor < 1) {
      throw new Error(`trainResolution ${config.trainResolution} must divide ${native[0].width}`);
    }
    seriesList = native.map((s) => downscaleSeries(s, factor));
    log(`training at ${config.trainResolution}px (native ${native[0].width}px)`);
  }

  const model = new SegNet2D({ levels: config.levels, baseWidth: config.baseWidth,
                               inChannels: 1, heads: 3 });
  model.init(streamSeed(config.seed, 0xa11ce));
  const dsW = config.dsWeights ?? supervisionWeights(3);

  const optimizer = tf.train.momentum(config.initialLr, config.momentum, true);
  const epochLoss: number[] = [];
  const learningRates: number[] = [];
  const orderRng = new Rng(streamSeed(config.seed, 0x0bde0));

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    const lr = polyLr(epoch, config.epochs, config.initialLr, config.polyExponent);
    optimizer.setLearningRate(lr);
    learningRates.push(lr);

    const order = orderRng.shuffle([...seriesList.keys()]);
    let lossSum = 0;
    for (const idx of order) {
      const augRng = new Rng(streamSeed(config.seed, 0xa06, epoch, idx));
      const batch = augmentSeries(seriesList[idx], config.augment, augRng);
      const { x, y } = toTensors(batch);
      const lossT = optimizer.minimize(
        () => deepSupervisionLoss(model.forward(x), y, dsW), true) as tf.Scalar;
      lossSum += (await lossT.data())[0];
      lossT.dispose();
      x.dispose();
      y.dispose();
    }
    const meanLoss = lossSum / seriesList.length;
    epochLoss.push(meanLoss);
    log(`epoch ${epoch + 1}/${config.epochs}  lr ${lr.toFixed(5)}  loss ${meanLoss.toFixed(4)}`);
  }

  // held-in sanity: Dice on the first series at NATIVE resolution
  const heldInDice = evaluateSeriesDice(model, native[0]);
  log(`held-in series dice: ${heldInDice.toFixed(4)}`);

  const history: TrainHistory = {
    epochLoss,
    learningRates,
    heldInDice,
    backend,
    wallSeconds: (Date.now() - t0) / 1000,
  };
  await saveCheckpoint(config.checkpointDir, model, config, history);
  log(`checkpoint written to ${config.checkpointDir}`);
  model.dispose();
  return history;
}
