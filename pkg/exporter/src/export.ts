import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { spawnSync } from 'node:child_process';

import * as tf from '@tensorflow/tfjs';

import { Rng } from './rng.js';
import { writeF32, atomicWriteJson } from './tensorio.js';
import { loadDataset, Dataset } from './synth.js';
import { TinyCnn, LayerId, LAYER_IDS, NUM_CLASSES, LayerTensor } from './model.js';
import {
  BundleManifest,
  ManifestImageEntry,
  LayerRefs,
  GradientCheckReport,
  MANIFEST_NAME,
} from './manifest.js';
import { accuracy, binaryAuc } from './metrics.js';
import { ExportError } from './errors.js';

export { ExportError };

export interface ExportJob {
  modelPath: string;
  imageDir: string;
  classNames: string[];
  targetLayers: string[];
  checkpointId: string;
  outDir: string;
  scorecamMaxN: number;
  scorecamBaseline: 'zero';
  /** 0 disables the finite-difference gradient audit */
  fdPositions: number;
  fdSeed: number;
  /** argv prefix for the consuming core's CLI, or null to skip that step */
  validateWith: string[] | null;
  architecture: string;
}

export const JOB_DEFAULTS = {
  scorecamMaxN: 32,
  scorecamBaseline: 'zero' as const,
  fdPositions: 0,
  fdSeed: 711,
  validateWith: null,
  architecture: 'tiny-cnn',
};

// small enough that the +-eps interval stays inside one linear region of
// the downstream relu/pool network at almost any probe, large enough that
// float32 forward noise stays two orders below the tolerance
const FD_EPSILON = 0.002;
const FD_MARGIN = 0.05; // keep probes away from the tap's own relu kink
const FD_TOLERANCE = 0.01;

function normalizeChannel(acts: LayerTensor, channel: number): Float32Array {
  const [h, w, c] = acts.shape;
  const out = new Float32Array(h * w);
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < h * w; i++) {
    const v = acts.data[i * c + channel];
    if (v < lo) lo = v;
    if (v > hi) hi = v;
    out[i] = v;
  }
  if (hi === lo) return new Float32Array(h * w); // flat channel masks nothing
  for (let i = 0; i < h * w; i++) {
    out[i] = Math.fround((out[i] - lo) / (hi - lo));
  }
  return out;
}

/** Channels ranked by L2 energy, strongest first; ties keep index order. */
export function rankChannelsByEnergy(acts: LayerTensor): number[] {
  const [h, w, c] = acts.shape;
  const energy = new Float64Array(c);
  for (let i = 0; i < h * w; i++) {
    for (let k = 0; k < c; k++) {
      const v = acts.data[i * c + k];
      energy[k] += v * v;
    }
  }
  return Array.from({ length: c }, (_, k) => k).sort(
    (a, b) => energy[b] - energy[a] || a - b,
  );
}

/**
 * ScoreCAM channel scores: mask the input with each selected channel
 * (bilinearly upsampled, min-max normalized) and record how much class
 * evidence the masked image retains over the all-zero baseline. Evidence
 * is the class logit: softmax probabilities saturate, which would push
 * every masked score below an asymmetric baseline and zero the map.
 * Channels outside the top maxN by L2 energy score 0.
 */
export function scorecamChannelScores(
  model: TinyCnn,
  pixels: Float32Array,
  acts: LayerTensor,
  trueLabel: number,
  maxN: number,
  baselineLogit: number,
): { scores: Float32Array; selected: number[] } {
  const [h, w, c] = acts.shape;
  const size = model.inputSize;
  const selected = rankChannelsByEnergy(acts).slice(0, Math.max(0, maxN));
  const scores = new Float32Array(c);
  if (selected.length === 0) return { scores, selected };

  const maskedInputs = selected.map((k) => {
    const mask = tf.tidy(() => {
      const ch = tf.tensor3d(normalizeChannel(acts, k), [h, w, 1]);
      const up = tf.image.resizeBilinear(ch, [size, size]);
      return up.dataSync() as Float32Array;
    });
    const masked = new Float32Array(size * size);
    for (let i = 0; i < masked.length; i++) {
      masked[i] = Math.fround(pixels[i] * mask[i]);
    }
    return masked;
  });
  const logits = model.predictLogits(maskedInputs);
  selected.forEach((k, idx) => {
    scores[k] = Math.fround(logits[idx][trueLabel] - baselineLogit);
  });
  return { scores, selected };
}

interface FdProbe {
  imageIdx: number;
  flat: number;
  relErr: number;
}

/**
 * Audit exported gradients with central differences through the model head:
 * f(A + eps e) - f(A - eps e) over 2 eps at randomly drawn tensor positions.
 * Probes sit where |A| clears a margin, so the layer's own relu kink cannot
 * fall inside the difference interval; a probe is admissible only when both
 * interval endpoints share the center's linear region (same pool winners
 * and relu gates downstream), because across a kink a finite difference
 * does not estimate the derivative of either branch.
 */
export function finiteDifferenceAudit(
  model: TinyCnn,
  layerId: LayerId,
  items: { acts: LayerTensor; grads: Float32Array; trueLabel: number }[],
  positions: number,
  seed: number,
): { maxRelErr: number; probes: FdProbe[] } {
  const rng = new Rng(seed);
  const probes: FdProbe[] = [];
  let maxRelErr = 0;
  let placed = 0;
  let attempts = 0;
  while (placed < positions) {
    if (++attempts > positions * 400) {
      throw new ExportError(
        `layer ${layerId}: could not find ${positions} admissible probe positions` +
          ` (|activation| > ${FD_MARGIN}, nonzero gradient, kink-free interval)`,
      );
    }
    const imageIdx = rng.int(items.length);
    const { acts, grads, trueLabel } = items[imageIdx];
    const flat = rng.int(acts.data.length);
    const a0 = acts.data[flat];
    // live activation, and a gradient worth checking: zero-gradient
    // positions agree with a zero difference trivially and audit nothing
    if (Math.abs(a0) <= FD_MARGIN || Math.abs(grads[flat]) <= 1e-6) continue;

    const bumped = Float32Array.from(acts.data);
    bumped[flat] = a0 + FD_EPSILON;
    const sigUp = model.regionSignature(layerId, bumped);
    const up = model.logitFromActs(layerId, bumped, trueLabel);
    bumped[flat] = a0 - FD_EPSILON;
    const sigDown = model.regionSignature(layerId, bumped);
    const down = model.logitFromActs(layerId, bumped, trueLabel);
    if (sigUp !== sigDown || sigUp !== model.regionSignature(layerId, acts.data)) continue;

    const fd = (up - down) / (2 * FD_EPSILON);
    const g = grads[flat];
    const relErr = Math.abs(fd - g) / Math.max(Math.abs(fd), Math.abs(g), 1e-3);
    probes.push({ imageIdx, flat, relErr });
    if (relErr > maxRelErr) maxRelErr = relErr;
    placed++;
  }
  return { maxRelErr, probes };
}

function runCoreValidation(cmd: string[], manifestPath: string): void {
  const scratch = fs.mkdtempSync(path.join(os.tmpdir(), 'bundle-validate-'));
  try {
    const argv = [
      ...cmd.slice(1),
      'cam',
      '--manifest',
      manifestPath,
      '--methods',
      'gradcam',
      '--out-dir',
      scratch,
    ];
    const res = spawnSync(cmd[0], argv, { encoding: 'utf-8', timeout: 120_000 });
    if (res.error) {
      throw new ExportError(`core validation could not run (${cmd.join(' ')}): ${res.error.message}`);
    }
    if (res.status !== 0) {
      const detail = (res.stderr || res.stdout || '').trim().split('\n').slice(-3).join(' ');
      throw new ExportError(`core rejected the manifest (exit ${res.status}): ${detail}`);
    }
  } finally {
    fs.rmSync(scratch, { recursive: true, force: true });
  }
}

function prepareOutDir(outDir: string): void {
  if (fs.existsSync(outDir)) {
    if (fs.readdirSync(outDir).length > 0) {
      throw new ExportError(`output directory ${outDir} already has contents; refusing to mix`);
    }
  } else {
    fs.mkdirSync(outDir, { recursive: true });
  }
}

/**
 * Run one checkpoint export: forward/backward every image, write tensors
 * and the manifest, audit gradients if asked, and hand the manifest to the
 * consuming core for validation. On any failure the partially written
 * output directory is removed.
 */
export function exportCheckpoint(job: ExportJob): string {
  const model = TinyCnn.load(job.modelPath);
  if (job.classNames.length !== NUM_CLASSES) {
    throw new ExportError(
      `model emits ${NUM_CLASSES} classes but ${job.classNames.length} class names were given`,
    );
  }
  for (const layer of job.targetLayers) {
    if (!model.hasLayer(layer)) {
      throw new ExportError(`layer ${layer} not found (model has: ${LAYER_IDS.join(', ')})`);
    }
  }
  if (job.targetLayers.length === 0) {
    throw new ExportError('at least one target layer is required');
  }
  if (job.scorecamBaseline !== 'zero') {
    throw new ExportError(`unsupported scorecam baseline ${job.scorecamBaseline}`);
  }
  const dataset = loadDataset(job.imageDir);
  const expected = dataset.index.width * dataset.index.height * dataset.index.channels;
  if (dataset.index.channels !== 1 || expected !== model.inputSize * model.inputSize) {
    throw new ExportError(
      `dataset geometry ${dataset.index.width}x${dataset.index.height}x${dataset.index.channels}` +
        ` does not fit model input ${model.inputSize}x${model.inputSize}x1`,
    );
  }
  for (const img of dataset.index.images) {
    if (img.label < 0 || img.label >= NUM_CLASSES) {
      throw new ExportError(`image ${img.image_id}: label ${img.label} out of range`);
    }
  }

  prepareOutDir(job.outDir);
  try {
    const manifestPath = writeBundle(model, dataset, job);
    if (job.validateWith) {
      runCoreValidation(job.validateWith, manifestPath);
    }
    return manifestPath;
  } catch (err) {
    fs.rmSync(job.outDir, { recursive: true, force: true });
    throw err;
  }
}

function writeBundle(model: TinyCnn, dataset: Dataset, job: ExportJob): string {
  const layers = job.targetLayers as LayerId[];
  const baselineLogits = model.predictLogits([new Float32Array(model.inputSize * model.inputSize)])[0];

  const entries: ManifestImageEntry[] = [];
  const fdItems = new Map<LayerId, { acts: LayerTensor; grads: Float32Array; trueLabel: number }[]>(
    layers.map((l) => [l, []]),
  );

  for (const img of dataset.index.images) {
    const pixels = dataset.pixels.get(img.image_id)!;
    const pass = model.forward(pixels);
    const layerRefs: Record<string, LayerRefs> = {};
    for (const layer of layers) {
      const acts = pass.layers[layer];
      const grads = model.gradAt(pixels, layer, img.label);
      const { scores, selected } = scorecamChannelScores(
        model,
        pixels,
        acts,
        img.label,
        job.scorecamMaxN,
        baselineLogits[img.label],
      );
      const stem = `${img.image_id}_${layer}`;
      writeF32(path.join(job.outDir, `${stem}_act.f32`), acts.data);
      writeF32(path.join(job.outDir, `${stem}_grad.f32`), grads);
      writeF32(path.join(job.outDir, `${stem}_scores.f32`), scores);
      layerRefs[layer] = {
        activations: { file: `${stem}_act.f32`, shape: [...acts.shape] },
        gradients: { file: `${stem}_grad.f32`, shape: [...acts.shape] },
        channel_scores: { file: `${stem}_scores.f32`, shape: [acts.shape[2]] },
        scorecam_channels: selected,
      };
      fdItems.get(layer)!.push({ acts, grads, trueLabel: img.label });
    }
    entries.push({
      image_id: img.image_id,
      true_label: img.label,
      confidences: Array.from(pass.probs),
      scorecam_baseline: job.scorecamBaseline,
      layers: layerRefs,
    });
  }

  let gradientCheck: GradientCheckReport | undefined;
  if (job.fdPositions > 0) {
    let worst = 0;
    for (const layer of layers) {
      const { maxRelErr } = finiteDifferenceAudit(
        model,
        layer,
        fdItems.get(layer)!,
        job.fdPositions,
        job.fdSeed,
      );
      if (maxRelErr > worst) worst = maxRelErr;
    }
    if (worst > FD_TOLERANCE) {
      throw new ExportError(
        `gradient audit failed: max relative error ${worst.toExponential(3)} exceeds ${FD_TOLERANCE}`,
      );
    }
    gradientCheck = {
      positions: job.fdPositions,
      epsilon: FD_EPSILON,
      max_rel_err: worst,
    };
  }

  const manifest: BundleManifest = {
    version: 1,
    architecture: job.architecture,
    checkpoint_id: job.checkpointId,
    head_type: 'softmax',
    target_layers: [...job.targetLayers],
    class_names: [...job.classNames],
    ...(gradientCheck ? { gradient_check: gradientCheck } : {}),
    images: entries,
  };
  const manifestPath = path.join(job.outDir, MANIFEST_NAME);
  atomicWriteJson(manifestPath, manifest);
  return manifestPath;
}

export interface SeriesCheckpoint {
  checkpointId: string;
  modelPath: string;
}

export function epochOfCheckpoint(checkpointId: string): number {
  const m = /(\d+)\s*$/.exec(checkpointId);
  if (!m) throw new ExportError(`checkpoint id ${checkpointId} has no trailing epoch number`);
  return parseInt(m[1], 10);
}

export interface SeriesResult {
  manifestPaths: string[];
  metricsPath: string;
}

/**
 * Export several checkpoints of one run into outDir/<checkpoint>/ plus a
 * combined epoch_metrics.csv (AUC and accuracy on the shared image set).
 * A failing checkpoint aborts the series; earlier manifests stay on disk.
 */
export function exportSeries(
  checkpoints: SeriesCheckpoint[],
  base: Omit<ExportJob, 'modelPath' | 'checkpointId' | 'outDir'>,
  outDir: string,
  phaseBoundary = 20,
): SeriesResult {
  if (checkpoints.length === 0) throw new ExportError('series needs at least one checkpoint');
  const epochs = checkpoints.map((c) => epochOfCheckpoint(c.checkpointId));
  for (let i = 1; i < epochs.length; i++) {
    if (epochs[i] <= epochs[i - 1]) {
      throw new ExportError(
        `checkpoint epochs must increase: ${checkpoints[i - 1].checkpointId} then ${checkpoints[i].checkpointId}`,
      );
    }
  }
  fs.mkdirSync(outDir, { recursive: true });

  const manifestPaths: string[] = [];
  const rows: string[] = ['epoch,phase,auc,accuracy'];
  for (let i = 0; i < checkpoints.length; i++) {
    const cp = checkpoints[i];
    const jobOut = path.join(outDir, cp.checkpointId);
    manifestPaths.push(
      exportCheckpoint({ ...base, modelPath: cp.modelPath, checkpointId: cp.checkpointId, outDir: jobOut }),
    );
    const model = TinyCnn.load(cp.modelPath);
    const dataset = loadDataset(base.imageDir);
    const ids = dataset.index.images.map((img) => img.image_id);
    const labels = dataset.index.images.map((img) => img.label);
    const probs = model.predictProbs(ids.map((id) => dataset.pixels.get(id)!));
    const predicted = probs.map((p) => (p[1] > p[0] ? 1 : 0));
    const posScores = probs.map((p) => p[1]);
    const phase = epochs[i] <= phaseBoundary ? 'TL' : 'FT';
    rows.push(
      `${epochs[i]},${phase},${binaryAuc(labels, posScores).toFixed(4)},${accuracy(labels, predicted).toFixed(4)}`,
    );
  }
  const metricsPath = path.join(outDir, 'epoch_metrics.csv');
  fs.writeFileSync(metricsPath, rows.join('\n') + '\n');
  return { manifestPaths, metricsPath };
}
