/**
 * Inference over a directory of 192x192 PNG slices: per-slice binary masks
 * at threshold 0.5, written as 8-bit PNGs under the input file names so the
 * output directory plugs straight into `sweepforge evaluate`. Throughput is
 * logged (FPS is informational, not asserted).
 */
import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { initBackend } from './backend';
import { loadCheckpoint } from './checkpoint';
import { readImagePng, writeMaskPng } from './png';

export interface PredictOptions {
  checkpointDir: string;
  imagesDir: string;
  outDir: string;
  threshold: number;   // default 0.5
  batch: number;       // frames per forward pass
  pattern?: string;    // substring filter on file names, e.g. "img_"
}

export async function predict(opts: PredictOptions,
                              log: (msg: string) => void = (m) => process.stderr.write(m + '\n')):
    Promise<{ files: number; fps: number }> {
  const backend = await initBackend();
  const { model } = loadCheckpoint(opts.checkpointDir);

  const names = fs.readdirSync(opts.imagesDir)
    .filter((n) => n.endsWith('.png') && (!opts.pattern || n.includes(opts.pattern)))
    .sort();
  if (names.length === 0) {
    throw new Error(`${opts.imagesDir}: no PNG slices to predict`);
  }
  fs.mkdirSync(opts.outDir, { recursive: true });

  let width = 0;
  let height = 0;
  let done = 0;
  const t0 = Date.now();
  while (done < names.length) {
    const chunk = names.slice(done, done + opts.batch);
    const frames = chunk.map((n) => {
      const img = readImagePng(path.join(opts.imagesDir, n));
      if (width === 0) ({ width, height } = img);
      if (img.width !== width || img.height !== height) {
        throw new Error(`${n}: shape ${img.height}x${img.width}, expected ${height}x${width}`);
      }
      return img.data;
    });
    const x = tf.tidy(() => {
      const flat = new Float32Array(chunk.length * height * width);
      frames.forEach((f, i) => flat.set(f, i * height * width));
      return tf.tensor4d(flat, [chunk.length, height, width, 1]);
    });
    const probs = model.predict(x);
    const data = (await probs.data()) as Float32Array;
    x.dispose();
    probs.dispose();
    const n = height * width;
    chunk.forEach((name, i) => {
      const mask = new Uint8Array(n);
      for (let j = 0; j < n; j++) mask[j] = data[i * n + j] >= opts.threshold ? 1 : 0;
      writeMaskPng(path.join(opts.outDir, name), mask, width, height);
    });
    done += chunk.length;
  }
  const seconds = (Date.now() - t0) / 1000;
  const fps = names.length / seconds;
  log(`predicted ${names.length} slices in ${seconds.toFixed(1)}s `
      + `(${fps.toFixed(1)} FPS on ${backend})`);
  model.dispose();
  return { files: names.length, fps };
}
