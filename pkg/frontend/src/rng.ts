// Deterministic random number generation for weight init and action sampling.
// splitmix64-seeded xoshiro-style 32-bit generator (mulberry32): fast, tiny,
// and reproducible across platforms, which the determinism contract needs.

export class Rng {
  private state: number;
  private spare: number | null = null;

  constructor(seed: number) {
    this.state = seed >>> 0;
    if (this.state === 0) this.state = 0x9e3779b9;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    let t = (this.state += 0x6d2b79f5);
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Standard normal via Box-Muller with a cached spare. */
  normal(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u === 0) u = this.next();
    while (v === 0) v = this.next();
    const r = Math.sqrt(-2.0 * Math.log(u));
    this.spare = r * Math.sin(2.0 * Math.PI * v);
    return r * Math.cos(2.0 * Math.PI * v);
  }

  /** Sample an index from a probability vector (assumed to sum to 1). */
  categorical(probs: ArrayLike<number>): number {
    const x = this.next();
    let acc = 0;
    let last = 0;
    for (let i = 0; i < probs.length; i++) {
      const p = probs[i]!;
      if (p > 0) last = i;
      acc += p;
      if (x < acc) return p > 0 ? i : last;
    }
    return last;
  }
}
