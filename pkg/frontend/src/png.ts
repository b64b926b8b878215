/**
 * PNG adapters for the sweepforge dataset formats: 16-bit grayscale images
 * with a linear [-1, 1] <-> [0, 65535] map, 8-bit label/mask images.
 */
import * as fs from 'fs';

interface DecodedPng {
  width: number;
  height: number;
  depth: number;
  channels: number;
  data: Uint8Array | Uint16Array;
}

interface PngInput {
  width: number;
  height: number;
  depth: 8 | 16;
  channels: 1;
  data: Uint8Array | Uint16Array;
}

// fast-png is ESM-only; node >= 20.17 supports require() of ESM modules,
// which keeps this package a plain CommonJS build
// eslint-disable-next-line @typescript-eslint/no-var-requires
const { decode, encode } = require('fast-png') as {
  decode(input: Uint8Array): DecodedPng;
  encode(img: PngInput): Uint8Array;
};

export interface GrayImage {
  width: number;
  height: number;
  /** intensities in [-1, 1], row-major */
  data: Float32Array;
}

export function readImagePng(path: string): GrayImage {
  const png = decode(fs.readFileSync(path));
  if (png.channels !== 1) {
    throw new Error(`${path}: expected single-channel grayscale, got ${png.channels} channels`);
  }
  const n = png.width * png.height;
  const out = new Float32Array(n);
  const scale = png.depth === 16 ? 65535 : 255;
  for (let i = 0; i < n; i++) {
    out[i] = (png.data[i] / scale) * 2 - 1;
  }
  return { width: png.width, height: png.height, data: out };
}

/** labels: raw 8-bit values, returned as 0/1 foreground indicator */
export function readLabelPng(path: string): { width: number; height: number; data: Float32Array } {
  const png = decode(fs.readFileSync(path));
  if (png.channels !== 1) {
    throw new Error(`${path}: expected single-channel label image`);
  }
  const n = png.width * png.height;
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = png.data[i] !== 0 ? 1 : 0;
  }
  return { width: png.width, height: png.height, data: out };
}

/** write a binary mask as 8-bit PNG (0 / 255), the format `evaluate` expects */
export function writeMaskPng(path: string, mask: Uint8Array, width: number, height: number): void {
  const data = new Uint8Array(width * height);
  for (let i = 0; i < data.length; i++) data[i] = mask[i] ? 255 : 0;
  fs.writeFileSync(path, encode({ width, height, depth: 8, channels: 1, data }));
}

export function writeImage16Png(path: string, img: Float32Array, width: number, height: number): void {
  const data = new Uint16Array(width * height);
  for (let i = 0; i < data.length; i++) {
    const x = Math.min(1, Math.max(-1, img[i]));
    data[i] = Math.round(((x + 1) / 2) * 65535);
  }
  fs.writeFileSync(path, encode({ width, height, depth: 16, channels: 1, data }));
}
