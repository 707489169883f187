import * as tf from '@tensorflow/tfjs';
import * as fs from 'node:fs';

import { Rng } from './rng.js';
import { ExportError } from './errors.js';
import { atomicWriteJson } from './tensorio.js';

export const LAYER_IDS = ['convA', 'convB'] as const;
export type LayerId = (typeof LAYER_IDS)[number];

export const NUM_CLASSES = 2;

// fixed topology: conv(3x3, 1->4) -> relu -> pool2 -> conv(3x3, 4->4)
//                 -> relu -> global mean pool -> dense(4->2) -> softmax
// the exported "activations" at convA/convB are the layer outputs after
// their relu fires, the tensors attribution methods conventionally hook
const SHAPE_A: [number, number, number, number] = [3, 3, 1, 4];
const SHAPE_B: [number, number, number, number] = [3, 3, 4, 4];
const SHAPE_D: [number, number] = [4, NUM_CLASSES];

export interface ModelWeights {
  version: 1;
  input_size: number;
  seed: number;
  convA: { kernel: number[]; bias: number[] };
  convB: { kernel: number[]; bias: number[] };
  dense: { kernel: number[]; bias: number[] };
}

export interface LayerTensor {
  shape: [number, number, number];
  data: Float32Array;
}

export interface ImagePass {
  layers: Record<LayerId, LayerTensor>;
  logits: Float32Array;
  probs: Float32Array;
}

function heFill(rng: Rng, count: number, fanIn: number): number[] {
  const std = Math.sqrt(2 / fanIn);
  return Array.from({ length: count }, () => Math.fround(rng.normal() * std));
}

function prod(xs: readonly number[]): number {
  return xs.reduce((a, b) => a * b, 1);
}

export class TinyCnn {
  constructor(
    readonly weights: ModelWeights,
    readonly inputSize: number = weights.input_size,
  ) {
    if (weights.version !== 1) {
      throw new ExportError(`unsupported model weights version ${weights.version}`);
    }
    if (inputSize < 8 || inputSize % 2 !== 0) {
      throw new ExportError(`input size must be an even number >= 8, got ${inputSize}`);
    }
    for (const [name, spec, kernel] of [
      ['convA', SHAPE_A, weights.convA],
      ['convB', SHAPE_B, weights.convB],
      ['dense', SHAPE_D, weights.dense],
    ] as const) {
      if (kernel.kernel.length !== prod(spec)) {
        throw new ExportError(`${name}: kernel holds ${kernel.kernel.length} values, needs ${prod(spec)}`);
      }
      const biasLen = spec[spec.length - 1];
      if (kernel.bias.length !== biasLen) {
        throw new ExportError(`${name}: bias holds ${kernel.bias.length} values, needs ${biasLen}`);
      }
    }
  }

  static init(seed: number, inputSize = 16): TinyCnn {
    const rng = new Rng(seed);
    return new TinyCnn({
      version: 1,
      input_size: inputSize,
      seed,
      convA: { kernel: heFill(rng, prod(SHAPE_A), 9), bias: new Array(SHAPE_A[3]).fill(0) },
      convB: { kernel: heFill(rng, prod(SHAPE_B), 36), bias: new Array(SHAPE_B[3]).fill(0) },
      dense: { kernel: heFill(rng, prod(SHAPE_D), SHAPE_D[0]), bias: new Array(NUM_CLASSES).fill(0) },
    });
  }

  static load(path: string): TinyCnn {
    let doc: ModelWeights;
    try {
      doc = JSON.parse(fs.readFileSync(path, 'utf-8'));
    } catch (err) {
      throw new ExportError(`cannot load model weights ${path}: ${(err as Error).message}`);
    }
    return new TinyCnn(doc);
  }

  save(path: string): void {
    atomicWriteJson(path, this.weights);
  }

  hasLayer(id: string): id is LayerId {
    return (LAYER_IDS as readonly string[]).includes(id);
  }

  layerShape(id: LayerId): [number, number, number] {
    const s = this.inputSize;
    return id === 'convA' ? [s, s, SHAPE_A[3]] : [s / 2, s / 2, SHAPE_B[3]];
  }

  private kernels() {
    const w = this.weights;
    return {
      ka: tf.tensor4d(w.convA.kernel, SHAPE_A),
      ba: tf.tensor1d(w.convA.bias),
      kb: tf.tensor4d(w.convB.kernel, SHAPE_B),
      bb: tf.tensor1d(w.convB.bias),
      kd: tf.tensor2d(w.dense.kernel, SHAPE_D),
      bd: tf.tensor1d(w.dense.bias),
    };
  }

  /** Post-relu convA output for a batch of images. */
  private tapA(x: tf.Tensor4D, k: ReturnType<TinyCnn['kernels']>): tf.Tensor4D {
    return tf.relu(tf.add(tf.conv2d(x, k.ka, 1, 'same'), k.ba)) as tf.Tensor4D;
  }

  /** convA tap -> post-relu convB output. */
  private aToB(a: tf.Tensor4D, k: ReturnType<TinyCnn['kernels']>): tf.Tensor4D {
    const pooled = tf.maxPool(a, 2, 2, 'same');
    return tf.relu(tf.add(tf.conv2d(pooled, k.kb, 1, 'same'), k.bb)) as tf.Tensor4D;
  }

  /** convB tap -> logits. The tap is already rectified; the head is linear. */
  private bToLogits(b: tf.Tensor4D, k: ReturnType<TinyCnn['kernels']>): tf.Tensor2D {
    const gap = tf.mean(b, [1, 2]) as tf.Tensor2D;
    return tf.add(tf.matMul(gap, k.kd), k.bd);
  }

  private toBatch(pixels: Float32Array[]): tf.Tensor4D {
    const s = this.inputSize;
    const flat = new Float32Array(pixels.length * s * s);
    pixels.forEach((p, i) => {
      if (p.length !== s * s) {
        throw new ExportError(`image ${i}: ${p.length} pixels, model wants ${s * s}`);
      }
      flat.set(p, i * s * s);
    });
    return tf.tensor4d(flat, [pixels.length, s, s, 1]);
  }

  /** Forward one image, keeping both taps. */
  forward(pixels: Float32Array): ImagePass {
    return tf.tidy(() => {
      const k = this.kernels();
      const a = this.tapA(this.toBatch([pixels]), k);
      const b = this.aToB(a, k);
      const logits = this.bToLogits(b, k);
      const probs = tf.softmax(logits);
      const [ha, wa, ca] = this.layerShape('convA');
      const [hb, wb, cb] = this.layerShape('convB');
      return {
        layers: {
          convA: { shape: [ha, wa, ca], data: a.dataSync() as Float32Array },
          convB: { shape: [hb, wb, cb], data: b.dataSync() as Float32Array },
        },
        logits: logits.dataSync() as Float32Array,
        probs: probs.dataSync() as Float32Array,
      };
    });
  }

  /** Class probabilities for many images at once. */
  predictProbs(pixels: Float32Array[]): Float32Array[] {
    if (pixels.length === 0) return [];
    return tf.tidy(() => {
      const k = this.kernels();
      const logits = this.bToLogits(this.aToB(this.tapA(this.toBatch(pixels), k), k), k);
      const flat = tf.softmax(logits).dataSync() as Float32Array;
      return pixels.map((_, i) => flat.slice(i * NUM_CLASSES, (i + 1) * NUM_CLASSES));
    });
  }

  /** Raw class logits for many images at once. */
  predictLogits(pixels: Float32Array[]): Float32Array[] {
    if (pixels.length === 0) return [];
    return tf.tidy(() => {
      const k = this.kernels();
      const logits = this.bToLogits(this.aToB(this.tapA(this.toBatch(pixels), k), k), k);
      const flat = logits.dataSync() as Float32Array;
      return pixels.map((_, i) => flat.slice(i * NUM_CLASSES, (i + 1) * NUM_CLASSES));
    });
  }

  /** Rest of the network as a function of one tap's activations. */
  headLogits(layerId: LayerId, acts: tf.Tensor4D, k: ReturnType<TinyCnn['kernels']>): tf.Tensor2D {
    return layerId === 'convA'
      ? this.bToLogits(this.aToB(acts, k), k)
      : this.bToLogits(acts, k);
  }

  /** Scalar class logit from perturbed tap activations; drives the FD check. */
  logitFromActs(layerId: LayerId, acts: Float32Array, classIdx: number): number {
    const [h, w, c] = this.layerShape(layerId);
    return tf.tidy(() => {
      const k = this.kernels();
      const a = tf.tensor4d(acts, [1, h, w, c]);
      const logits = this.headLogits(layerId, a, k);
      return (logits.dataSync() as Float32Array)[classIdx];
    });
  }

  /**
   * Fingerprint of the linear region the head occupies for given tap
   * activations: max-pool winner indices and downstream relu gate signs.
   * The head from convB is affine, so every input shares one region. Two
   * activation tensors with equal signatures see the same affine head, so
   * a finite difference between them is exact for the branch autodiff
   * differentiates.
   */
  regionSignature(layerId: LayerId, acts: Float32Array): string {
    if (layerId === 'convB') return 'affine';
    const [h, w, c] = this.layerShape('convA');
    return tf.tidy(() => {
      const k = this.kernels();
      const a = tf.tensor4d(acts, [1, h, w, c]);
      const { result, indexes } = tf.maxPoolWithArgmax(a, 2, 2, 'same');
      const pre = tf.add(tf.conv2d(result as tf.Tensor4D, k.kb, 1, 'same'), k.bb);
      const winners = Array.from(indexes.dataSync()).join(',');
      const gates = Array.from(pre.dataSync(), (v) => (v > 0 ? '1' : '0')).join('');
      return `${winners}|${gates}`;
    });
  }

  /** d(class logit) / d(tap activations), evaluated by autodiff. */
  gradAt(pixels: Float32Array, layerId: LayerId, classIdx: number): Float32Array {
    if (classIdx < 0 || classIdx >= NUM_CLASSES) {
      throw new Error(`class index ${classIdx} out of range`);
    }
    const [h, w, c] = this.layerShape(layerId);
    return tf.tidy(() => {
      const k = this.kernels();
      const tap = layerId === 'convA'
        ? this.tapA(this.toBatch([pixels]), k)
        : this.aToB(this.tapA(this.toBatch([pixels]), k), k);
      const f = (a: tf.Tensor) =>
        tf.reshape(
          tf.slice(this.headLogits(layerId, a as tf.Tensor4D, k), [0, classIdx], [1, 1]),
          [],
        ) as tf.Scalar;
      const g = tf.grad(f)(tap);
      return (g.dataSync() as Float32Array).slice(0, h * w * c);
    });
  }

  /**
   * Fit on a pixel/label set with full-batch SGD. Returns a new model;
   * weight layout and seed bookkeeping carry over.
   *
   * Only the kernels train. Biases stay at their stored values (zero for
   * freshly initialised models) so a black input keeps producing zero
   * logits: channel scoring subtracts the black-input output as its
   * reference, and a bias-driven offset there would let the model encode
   * one class as plain darkness, which poisons that reference.
   */
  train(pixels: Float32Array[], labels: number[], steps: number, lr: number): TinyCnn {
    if (pixels.length !== labels.length || pixels.length === 0) {
      throw new Error('training needs matching, non-empty pixel and label lists');
    }
    const w = this.weights;
    const vars = {
      ka: tf.variable(tf.tensor4d(w.convA.kernel, SHAPE_A)),
      kb: tf.variable(tf.tensor4d(w.convB.kernel, SHAPE_B)),
      kd: tf.variable(tf.tensor2d(w.dense.kernel, SHAPE_D)),
    };
    const fixed = {
      ba: tf.tensor1d(w.convA.bias),
      bb: tf.tensor1d(w.convB.bias),
      bd: tf.tensor1d(w.dense.bias),
    };
    const batch = this.toBatch(pixels);
    const oneHot = tf.oneHot(tf.tensor1d(labels, 'int32'), NUM_CLASSES);
    const optimizer = tf.train.sgd(lr);
    const varList = Object.values(vars);
    for (let step = 0; step < steps; step++) {
      optimizer.minimize(
        () => {
          const a = tf.add(tf.conv2d(batch, vars.ka, 1, 'same'), fixed.ba) as tf.Tensor4D;
          const pooled = tf.maxPool(tf.relu(a), 2, 2, 'same');
          const b = tf.add(tf.conv2d(pooled, vars.kb, 1, 'same'), fixed.bb) as tf.Tensor4D;
          const gap = tf.mean(tf.relu(b), [1, 2]) as tf.Tensor2D;
          const logits = tf.add(tf.matMul(gap, vars.kd), fixed.bd) as tf.Tensor2D;
          return tf.losses.softmaxCrossEntropy(oneHot, logits) as tf.Scalar;
        },
        false,
        varList,
      );
    }
    const fitted: ModelWeights = {
      version: 1,
      input_size: w.input_size,
      seed: w.seed,
      convA: {
        kernel: Array.from(vars.ka.dataSync()),
        bias: [...w.convA.bias],
      },
      convB: {
        kernel: Array.from(vars.kb.dataSync()),
        bias: [...w.convB.bias],
      },
      dense: {
        kernel: Array.from(vars.kd.dataSync()),
        bias: [...w.dense.bias],
      },
    };
    batch.dispose();
    oneHot.dispose();
    optimizer.dispose();
    varList.forEach((v) => v.dispose());
    Object.values(fixed).forEach((t) => t.dispose());
    return new TinyCnn(fitted);
  }
}
