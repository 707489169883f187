import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { describe, it, expect, afterAll } from 'vitest';

import { synthesizeDataset, loadDataset } from '../src/synth.js';
import { Rng } from '../src/rng.js';

const scratchDirs: string[] = [];

function scratch(): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'synth-test-'));
  scratchDirs.push(dir);
  return dir;
}

afterAll(() => {
  for (const dir of scratchDirs) fs.rmSync(dir, { recursive: true, force: true });
});

describe('synthesizeDataset', () => {
  it('is byte-deterministic for a fixed seed', () => {
    const a = scratch();
    const b = scratch();
    synthesizeDataset(a, { count: 10, duplicatePairs: 2, seed: 42 });
    synthesizeDataset(b, { count: 10, duplicatePairs: 2, seed: 42 });
    for (const name of fs.readdirSync(a).sort()) {
      expect(fs.readFileSync(path.join(a, name)).equals(fs.readFileSync(path.join(b, name)))).toBe(
        true,
      );
    }
  });

  it('changes content when the seed changes', () => {
    const a = scratch();
    const b = scratch();
    synthesizeDataset(a, { count: 4, duplicatePairs: 0, seed: 1 });
    synthesizeDataset(b, { count: 4, duplicatePairs: 0, seed: 2 });
    expect(
      fs.readFileSync(path.join(a, 'img000.f32')).equals(fs.readFileSync(path.join(b, 'img000.f32'))),
    ).toBe(false);
  });

  it('emits duplicate pairs with identical bytes and _dup ids', () => {
    const dir = scratch();
    const index = synthesizeDataset(dir, { count: 8, duplicatePairs: 3, seed: 7 });
    expect(index.images).toHaveLength(8);
    const ids = index.images.map((i) => i.image_id);
    for (const base of ['img000', 'img001', 'img002']) {
      expect(ids).toContain(base);
      expect(ids).toContain(`${base}_dup`);
      const orig = fs.readFileSync(path.join(dir, `${base}.f32`));
      const dup = fs.readFileSync(path.join(dir, `${base}_dup.f32`));
      expect(orig.equals(dup)).toBe(true);
    }
    const byId = new Map(index.images.map((i) => [i.image_id, i] as const));
    expect(byId.get('img001_dup')!.label).toBe(byId.get('img001')!.label);
  });

  it('keeps every pixel inside [0, 1]', () => {
    const dir = scratch();
    synthesizeDataset(dir, { count: 6, duplicatePairs: 0, seed: 3 });
    const ds = loadDataset(dir);
    for (const [, px] of ds.pixels) {
      for (const v of px) {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThanOrEqual(1);
      }
    }
  });

  it('rejects more duplicate pairs than the count allows', () => {
    expect(() => synthesizeDataset(scratch(), { count: 4, duplicatePairs: 3, seed: 1 })).toThrow(
      /duplicate pairs/,
    );
  });
});

describe('loadDataset', () => {
  it('round-trips what synthesizeDataset wrote', () => {
    const dir = scratch();
    const index = synthesizeDataset(dir, { count: 6, duplicatePairs: 1, seed: 5, size: 12 });
    const ds = loadDataset(dir);
    expect(ds.index).toEqual(index);
    expect(ds.pixels.size).toBe(6);
    expect(ds.pixels.get('img000')!.length).toBe(12 * 12);
  });

  it('names the failing item when an image file cannot be decoded', () => {
    const dir = scratch();
    synthesizeDataset(dir, { count: 4, duplicatePairs: 0, seed: 9 });
    fs.writeFileSync(path.join(dir, 'img002.f32'), Buffer.from([1, 2, 3]));
    expect(() => loadDataset(dir)).toThrow(/image img002 failed to decode/);
  });

  it('rejects a dataset directory with no index', () => {
    expect(() => loadDataset(scratch())).toThrow(/cannot read dataset index/);
  });

  it('rejects duplicate image ids in the index', () => {
    const dir = scratch();
    synthesizeDataset(dir, { count: 4, duplicatePairs: 0, seed: 9 });
    const indexPath = path.join(dir, 'index.json');
    const index = JSON.parse(fs.readFileSync(indexPath, 'utf-8'));
    index.images.push({ ...index.images[0] });
    fs.writeFileSync(indexPath, JSON.stringify(index));
    expect(() => loadDataset(dir)).toThrow(/duplicate image_id/);
  });
});

describe('Rng', () => {
  it('replays the same stream for the same seed', () => {
    const a = new Rng(123);
    const b = new Rng(123);
    for (let i = 0; i < 50; i++) expect(a.next()).toBe(b.next());
  });

  it('bounds int() draws', () => {
    const rng = new Rng(1);
    for (let i = 0; i < 200; i++) {
      const v = rng.int(7);
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(7);
      expect(Number.isInteger(v)).toBe(true);
    }
  });
});
