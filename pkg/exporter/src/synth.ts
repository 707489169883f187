import * as fs from 'node:fs';
import * as path from 'node:path';

import { Rng } from './rng.js';
import { ExportError } from './errors.js';
import { readF32, writeF32, atomicWriteJson } from './tensorio.js';

export interface DatasetImage {
  image_id: string;
  label: number;
  file: string;
}

export interface DatasetIndex {
  version: 1;
  width: number;
  height: number;
  channels: number;
  images: DatasetImage[];
}

export interface Dataset {
  index: DatasetIndex;
  /** image_id -> pixel data, length width*height*channels */
  pixels: Map<string, Float32Array>;
}

export interface SynthOptions {
  count: number;
  /** this many images are emitted twice (identical bytes, "_dup" suffix) */
  duplicatePairs: number;
  seed: number;
  size?: number;
}

/**
 * Two-class blob images: class 0 lights up the top-left quadrant, class 1
 * the bottom-right, plus low uniform noise. The classes are linearly
 * separable by mass location, so a few SGD steps suffice to fit them.
 */
export function synthesizeImage(rng: Rng, label: number, size: number): Float32Array {
  const base = size / 4;
  const cy = (label === 0 ? base : 3 * base) + rng.uniform(-1.5, 1.5);
  const cx = (label === 0 ? base : 3 * base) + rng.uniform(-1.5, 1.5);
  const sigma = rng.uniform(1.8, 2.8);
  const amp = rng.uniform(0.6, 0.9);
  const out = new Float32Array(size * size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      let v = amp * Math.exp(-d2 / (2 * sigma * sigma)) + rng.uniform(0, 0.08);
      if (v < 0) v = 0;
      if (v > 1) v = 1;
      out[y * size + x] = Math.fround(v);
    }
  }
  return out;
}

export function synthesizeDataset(outDir: string, opts: SynthOptions): DatasetIndex {
  const size = opts.size ?? 16;
  if (opts.count < 2) throw new ExportError(`dataset needs at least 2 images, got ${opts.count}`);
  if (opts.duplicatePairs * 2 > opts.count) {
    throw new ExportError(
      `${opts.duplicatePairs} duplicate pairs need ${opts.duplicatePairs * 2} slots, have ${opts.count}`,
    );
  }
  const rng = new Rng(opts.seed);
  const distinct = opts.count - opts.duplicatePairs;
  fs.mkdirSync(outDir, { recursive: true });

  const images: DatasetImage[] = [];
  for (let i = 0; i < distinct; i++) {
    const label = i % 2;
    const id = `img${String(i).padStart(3, '0')}`;
    const file = `${id}.f32`;
    const pixels = synthesizeImage(rng, label, size);
    writeF32(path.join(outDir, file), pixels);
    images.push({ image_id: id, label, file });
    if (i < opts.duplicatePairs) {
      const dupId = `${id}_dup`;
      const dupFile = `${dupId}.f32`;
      writeF32(path.join(outDir, dupFile), pixels);
      images.push({ image_id: dupId, label, file: dupFile });
    }
  }
  const index: DatasetIndex = { version: 1, width: size, height: size, channels: 1, images };
  atomicWriteJson(path.join(outDir, 'index.json'), index);
  return index;
}

export function loadDataset(dir: string): Dataset {
  const indexPath = path.join(dir, 'index.json');
  let index: DatasetIndex;
  try {
    index = JSON.parse(fs.readFileSync(indexPath, 'utf-8'));
  } catch (err) {
    throw new ExportError(`cannot read dataset index ${indexPath}: ${(err as Error).message}`);
  }
  if (index.version !== 1) {
    throw new ExportError(`${indexPath}: unsupported dataset version ${index.version}`);
  }
  const n = index.width * index.height * index.channels;
  const pixels = new Map<string, Float32Array>();
  const seen = new Set<string>();
  for (const img of index.images) {
    if (seen.has(img.image_id)) {
      throw new ExportError(`${indexPath}: duplicate image_id ${img.image_id}`);
    }
    seen.add(img.image_id);
    try {
      pixels.set(img.image_id, readF32(path.join(dir, img.file), n));
    } catch (err) {
      throw new ExportError(`image ${img.image_id} failed to decode: ${(err as Error).message}`);
    }
  }
  if (pixels.size === 0) throw new ExportError(`${indexPath}: dataset holds no images`);
  return { index, pixels };
}
