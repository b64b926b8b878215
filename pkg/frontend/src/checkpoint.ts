/**
 * Checkpoint format: a directory holding model.json (architecture, weight
 * manifest in declaration order, config echo, training history) and
 * weights.bin (the float32 tensors concatenated little-endian). Writes are
 * atomic (temp file + rename).
 */
import * as fs from 'fs';
import * as path from 'path';
import { Arch, SegNet2D } from './model';

export interface CheckpointMeta {
  format: string;
  arch: Arch;
  weights: { name: string; shape: number[] }[];
  config?: unknown;
  history?: unknown;
}

const FORMAT = 'sweepforge-trainer-v1';

export async function saveCheckpoint(dir: string, model: SegNet2D,
                                     config?: unknown, history?: unknown): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  const specs = model.paramSpecs();
  let total = 0;
  for (const s of specs) total += s.shape.reduce((a, b) => a * b, 1);
  const blob = new Float32Array(total);
  let offset = 0;
  for (const s of specs) {
    const v = model.params.get(s.name);
    if (!v) throw new Error(`cannot save: missing parameter ${s.name}`);
    const data = (await v.data()) as Float32Array;
    blob.set(data, offset);
    offset += data.length;
  }
  const meta: CheckpointMeta = {
    format: FORMAT,
    arch: model.arch,
    weights: specs,
    config,
    history,
  };
  const metaTmp = path.join(dir, '.model.json.tmp');
  const binTmp = path.join(dir, '.weights.bin.tmp');
  fs.writeFileSync(metaTmp, JSON.stringify(meta, null, 2) + '\n');
  fs.writeFileSync(binTmp, Buffer.from(blob.buffer));
  fs.renameSync(binTmp, path.join(dir, 'weights.bin'));
  fs.renameSync(metaTmp, path.join(dir, 'model.json'));
}

export function loadCheckpoint(dir: string): { model: SegNet2D; meta: CheckpointMeta } {
  const metaPath = path.join(dir, 'model.json');
  const binPath = path.join(dir, 'weights.bin');
  if (!fs.existsSync(metaPath) || !fs.existsSync(binPath)) {
    throw new Error(`${dir}: not a trainer checkpoint (model.json + weights.bin expected)`);
  }
  const meta = JSON.parse(fs.readFileSync(metaPath, 'utf-8')) as CheckpointMeta;
  if (meta.format !== FORMAT) {
    throw new Error(`${dir}: unsupported checkpoint format ${meta.format}`);
  }
  const raw = fs.readFileSync(binPath);
  const blob = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  const weights = new Map<string, Float32Array>();
  let offset = 0;
  for (const s of meta.weights) {
    const n = s.shape.reduce((a, b) => a * b, 1);
    weights.set(s.name, blob.slice(offset, offset + n));
    offset += n;
  }
  const model = new SegNet2D(meta.arch);
  model.setWeights(weights);
  return { model, meta };
}
