import { TinyCnn } from '../src/model.js';

/**
 * Train in bursts, yielding to the event loop between them so the test
 * worker can answer runner heartbeats. Plain SGD keeps no optimizer state,
 * so chunked fitting lands on the same weights as one long run.
 */
export async function trainChunked(
  model: TinyCnn,
  pixels: Float32Array[],
  labels: number[],
  steps: number,
  lr: number,
  chunk = 100,
): Promise<TinyCnn> {
  let fitted = model;
  for (let done = 0; done < steps; done += chunk) {
    fitted = fitted.train(pixels, labels, Math.min(chunk, steps - done), lr);
    await new Promise((resolve) => setImmediate(resolve));
  }
  return fitted;
}
