/** Deterministic RNG (mulberry32) so every export is reproducible byte for byte. */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform in [0, 1). */
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

  /** Integer in [0, n). */
  int(n: number): number {
    if (n <= 0) throw new Error(`rng.int needs a positive bound, got ${n}`);
    return Math.floor(this.next() * n);
  }

  /** Standard normal via Box-Muller; one draw per call, no caching. */
  normal(): number {
    let u = this.next();
    if (u === 0) u = 1e-12; // log(0) guard
    const v = this.next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }
}
