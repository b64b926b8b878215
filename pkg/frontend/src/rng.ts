/**
 * Small deterministic PRNG so training is reproducible under a seed: tfjs'
 * own random ops are not seedable on every backend (and RandomUniform has no
 * wasm kernel at all), so every random draw in this package goes through
 * here.
 */

/** mulberry32: fast 32-bit generator, good enough for augmentation/init. */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** uniform float in [0, 1) */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next();
  }

  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** standard normal via Box-Muller */
  gauss(): number {
    let u = 0;
    while (u === 0) u = this.next();
    const v = this.next();
    return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
  }

  /** Fisher-Yates shuffle, in place */
  shuffle<T>(items: T[]): T[] {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      [items[i], items[j]] = [items[j], items[i]];
    }
    return items;
  }

  /** derive an independent child stream from this one plus a label */
  child(label: number): Rng {
    return new Rng((this.state ^ Math.imul(label + 0x9e3779b9, 0x85ebca6b)) >>> 0);
  }
}

/** derive a 32-bit stream seed from a root seed and position labels */
export function streamSeed(root: number, ...labels: number[]): number {
  let h = root >>> 0;
  for (const l of labels) {
    h = Math.imul(h ^ (l >>> 0), 0x9e3779b1) >>> 0;
    h = ((h << 13) | (h >>> 19)) >>> 0;
  }
  return h;
}
