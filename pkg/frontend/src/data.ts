/**
 * Reader for the sweepforge dataset layout: manifest.json at the root,
 * per-series directories of img_####.png (16-bit, [-1,1]) and
 * lbl_####.png (8-bit labels). Series are the training batches.
 */
import * as fs from 'fs';
import * as path from 'path';
import { readImagePng, readLabelPng } from './png';

export interface SeriesRecord {
  series: string;
  combo: string;
  k: number;
  tau: number;
  frame_count: number;
  files: { images: string[]; labels: string[]; meta: string };
}

export interface Manifest {
  case_id: string;
  records: SeriesRecord[];
  [key: string]: unknown;
}

export interface Series {
  name: string;
  frames: number;
  height: number;
  width: number;
  /** (frames, height, width) row-major, intensities in [-1, 1] */
  images: Float32Array;
  /** (frames, height, width) binary foreground */
  labels: Float32Array;
}

export function loadManifest(datasetDir: string): Manifest {
  const p = path.join(datasetDir, 'manifest.json');
  if (!fs.existsSync(p)) {
    throw new Error(`${datasetDir}: no manifest.json (not a sweepforge dataset?)`);
  }
  const doc = JSON.parse(fs.readFileSync(p, 'utf-8')) as Manifest;
  if (!Array.isArray(doc.records) || doc.records.length === 0) {
    throw new Error(`${p}: manifest has no series records`);
  }
  return doc;
}

export function loadSeries(datasetDir: string, rec: SeriesRecord): Series {
  const first = readImagePng(path.join(datasetDir, rec.files.images[0]));
  const { width, height } = first;
  const frames = rec.files.images.length;
  const images = new Float32Array(frames * height * width);
  const labels = new Float32Array(frames * height * width);
  for (let f = 0; f < frames; f++) {
    const img = f === 0 ? first : readImagePng(path.join(datasetDir, rec.files.images[f]));
    const lbl = readLabelPng(path.join(datasetDir, rec.files.labels[f]));
    if (img.width !== width || img.height !== height
        || lbl.width !== width || lbl.height !== height) {
      throw new Error(`${rec.series}: inconsistent frame shapes`);
    }
    images.set(img.data, f * height * width);
    labels.set(lbl.data, f * height * width);
  }
  return { name: rec.series, frames, height, width, images, labels };
}

/**
 * Integer-factor downscale for the training-resolution knob:
 * mean pooling for images, max pooling for labels (presence preserved).
 */
export function downscaleSeries(s: Series, factor: number): Series {
  if (factor === 1) return s;
  if (s.height % factor !== 0 || s.width % factor !== 0) {
    throw new Error(`cannot downscale ${s.height}x${s.width} by ${factor}`);
  }
  const h = s.height / factor;
  const w = s.width / factor;
  const images = new Float32Array(s.frames * h * w);
  const labels = new Float32Array(s.frames * h * w);
  for (let f = 0; f < s.frames; f++) {
    const srcOff = f * s.height * s.width;
    const dstOff = f * h * w;
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        let sum = 0;
        let maxL = 0;
        for (let di = 0; di < factor; di++) {
          for (let dj = 0; dj < factor; dj++) {
            const idx = srcOff + (i * factor + di) * s.width + (j * factor + dj);
            sum += s.images[idx];
            if (s.labels[idx] > maxL) maxL = s.labels[idx];
          }
        }
        images[dstOff + i * w + j] = sum / (factor * factor);
        labels[dstOff + i * w + j] = maxL;
      }
    }
  }
  return { name: s.name, frames: s.frames, height: h, width: w, images, labels };
}
