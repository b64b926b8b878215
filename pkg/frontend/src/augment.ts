/**
 * Data augmentation on CPU arrays, applied per frame with seeded draws:
 * geometric (rotation, scaling, mirroring, elastic deformation; image
 * sampled bilinearly with -1 fill, label nearest with 0 fill) and intensity
 * (additive Gaussian noise, brightness, contrast, gamma). With every
 * probability at 0 the input batch is reproduced bit-exactly.
 */
import { Rng } from './rng';
import { Series } from './data';

export interface AugmentConfig {
  pMirror: number;
  pAffine: number;           // rotation + scaling, one resample
  maxRotationDeg: number;
  scaleRange: [number, number];
  pElastic: number;
  elasticGrid: number;       // control points per side
  elasticAmplitudePx: number;
  pNoise: number;
  noiseSigma: number;
  pBrightness: number;
  brightnessDelta: number;
  pContrast: number;
  contrastRange: [number, number];
  pGamma: number;
  gammaRange: [number, number];
}

export const DEFAULT_AUGMENT: AugmentConfig = {
  pMirror: 0.5,
  pAffine: 0.5,
  maxRotationDeg: 15,
  scaleRange: [0.9, 1.1],
  pElastic: 0.3,
  elasticGrid: 4,
  elasticAmplitudePx: 4,
  pNoise: 0.3,
  noiseSigma: 0.05,
  pBrightness: 0.3,
  brightnessDelta: 0.1,
  pContrast: 0.3,
  contrastRange: [0.75, 1.25],
  pGamma: 0.3,
  gammaRange: [0.7, 1.5],
};

export const NO_AUGMENT: AugmentConfig = {
  ...DEFAULT_AUGMENT,
  pMirror: 0, pAffine: 0, pElastic: 0, pNoise: 0,
  pBrightness: 0, pContrast: 0, pGamma: 0,
};

interface Frame {
  img: Float32Array;
  lbl: Float32Array;
}

function bilinear(src: Float32Array, h: number, w: number,
                  y: number, x: number, fill: number): number {
  if (y < 0 || x < 0 || y > h - 1 || x > w - 1) return fill;
  const y0 = Math.min(Math.floor(y), h - 2 < 0 ? 0 : h - 2);
  const x0 = Math.min(Math.floor(x), w - 2 < 0 ? 0 : w - 2);
  const fy = y - y0;
  const fx = x - x0;
  const y1 = Math.min(y0 + 1, h - 1);
  const x1 = Math.min(x0 + 1, w - 1);
  return (src[y0 * w + x0] * (1 - fy) * (1 - fx)
        + src[y0 * w + x1] * (1 - fy) * fx
        + src[y1 * w + x0] * fy * (1 - fx)
        + src[y1 * w + x1] * fy * fx);
}

function nearest(src: Float32Array, h: number, w: number,
                 y: number, x: number, fill: number): number {
  const yi = Math.round(y);
  const xi = Math.round(x);
  if (yi < 0 || xi < 0 || yi >= h || xi >= w) return fill;
  return src[yi * w + xi];
}

/** smooth per-pixel displacement field from a coarse grid of random offsets */
function elasticField(rng: Rng, h: number, w: number, grid: number,
                      amplitude: number): { dy: Float32Array; dx: Float32Array } {
  const gy = new Float32Array(grid * grid);
  const gx = new Float32Array(grid * grid);
  for (let i = 0; i < grid * grid; i++) {
    gy[i] = rng.gauss() * amplitude;
    gx[i] = rng.gauss() * amplitude;
  }
  const dy = new Float32Array(h * w);
  const dx = new Float32Array(h * w);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      const v = (i / (h - 1)) * (grid - 1);
      const u = (j / (w - 1)) * (grid - 1);
      dy[i * w + j] = bilinear(gy, grid, grid, v, u, 0);
      dx[i * w + j] = bilinear(gx, grid, grid, v, u, 0);
    }
  }
  return { dy, dx };
}

function augmentFrame(frame: Frame, h: number, w: number,
                      cfg: AugmentConfig, rng: Rng): Frame {
  let { img, lbl } = frame;

  const doMirror = rng.next() < cfg.pMirror;
  const doAffine = rng.next() < cfg.pAffine;
  const doElastic = rng.next() < cfg.pElastic;
  const angle = doAffine ? rng.uniform(-cfg.maxRotationDeg, cfg.maxRotationDeg) * Math.PI / 180 : 0;
  const scale = doAffine ? rng.uniform(cfg.scaleRange[0], cfg.scaleRange[1]) : 1;
  const field = doElastic
    ? elasticField(rng, h, w, cfg.elasticGrid, cfg.elasticAmplitudePx)
    : null;

  if (doMirror || doAffine || doElastic) {
    const outImg = new Float32Array(h * w);
    const outLbl = new Float32Array(h * w);
    const cy = (h - 1) / 2;
    const cx = (w - 1) / 2;
    const cos = Math.cos(angle) / scale;
    const sin = Math.sin(angle) / scale;
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        const jj = doMirror ? w - 1 - j : j;
        // inverse map: output pixel -> source coordinates
        let sy = cy + (i - cy) * cos - (jj - cx) * sin;
        let sx = cx + (i - cy) * sin + (jj - cx) * cos;
        if (field) {
          sy += field.dy[i * w + j];
          sx += field.dx[i * w + j];
        }
        outImg[i * w + j] = bilinear(img, h, w, sy, sx, -1);
        outLbl[i * w + j] = nearest(lbl, h, w, sy, sx, 0);
      }
    }
    img = outImg;
    lbl = outLbl;
  }

  const doNoise = rng.next() < cfg.pNoise;
  const doBrightness = rng.next() < cfg.pBrightness;
  const doContrast = rng.next() < cfg.pContrast;
  const doGamma = rng.next() < cfg.pGamma;
  if (doNoise || doBrightness || doContrast || doGamma) {
    if (img === frame.img) img = img.slice();
    const sigma = doNoise ? rng.uniform(0, cfg.noiseSigma) : 0;
    const bright = doBrightness ? rng.uniform(-cfg.brightnessDelta, cfg.brightnessDelta) : 0;
    const contrast = doContrast ? rng.uniform(cfg.contrastRange[0], cfg.contrastRange[1]) : 1;
    const gamma = doGamma ? rng.uniform(cfg.gammaRange[0], cfg.gammaRange[1]) : 1;
    let mean = 0;
    if (doContrast) {
      for (let i = 0; i < img.length; i++) mean += img[i];
      mean /= img.length;
    }
    for (let i = 0; i < img.length; i++) {
      let v = img[i];
      if (doContrast) v = mean + (v - mean) * contrast;
      if (doGamma) {
        const v01 = Math.min(1, Math.max(0, (v + 1) / 2));
        v = Math.pow(v01, gamma) * 2 - 1;
      }
      if (doBrightness) v += bright;
      if (doNoise) v += rng.gauss() * sigma;
      img[i] = Math.min(1, Math.max(-1, v));
    }
  }
  return { img, lbl };
}

/** augment a whole series; a fresh Series is returned, inputs untouched */
export function augmentSeries(s: Series, cfg: AugmentConfig, rng: Rng): Series {
  const n = s.height * s.width;
  const images = new Float32Array(s.frames * n);
  const labels = new Float32Array(s.frames * n);
  for (let f = 0; f < s.frames; f++) {
    const out = augmentFrame(
      { img: s.images.subarray(f * n, (f + 1) * n) as Float32Array,
        lbl: s.labels.subarray(f * n, (f + 1) * n) as Float32Array },
      s.height, s.width, cfg, rng.child(f));
    images.set(out.img, f * n);
    labels.set(out.lbl, f * n);
  }
  return { ...s, images, labels };
}
