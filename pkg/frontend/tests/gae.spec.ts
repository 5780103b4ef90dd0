import { describe, expect, it } from 'vitest';
import { advantageTargets, computeGae, normalizeAdvantages } from '../src/gae.js';
import { Rng } from '../src/rng.js';

/** Direct evaluation of the truncated double sum, one episode segment at a time. */
function bruteForceGae(
  rewards: number[],
  values: number[],
  dones: number[],
  gamma: number,
  lam: number,
): number[] {
  const n = rewards.length;
  const delta = (t: number) =>
    rewards[t]! + gamma * values[t + 1]! * (dones[t] ? 0 : 1) - values[t]!;
  const adv: number[] = [];
  for (let t = 0; t < n; t++) {
    let sum = 0;
    let factor = 1;
    for (let h = 0; t + h < n; h++) {
      sum += factor * delta(t + h);
      if (dones[t + h]) break;
      factor *= gamma * lam;
    }
    adv.push(sum);
  }
  return adv;
}

describe('computeGae', () => {
  it('single step with zero values returns the reward', () => {
    const adv = computeGae({ rewards: [1], values: [0, 0], dones: [1], gamma: 0.9, lam: 0.8 });
    expect(adv[0]).toBe(1);
  });

  it('telescopes with gamma = lam = 1 and zero values', () => {
    const adv = computeGae({ rewards: [1, 2], values: [0, 0, 0], dones: [0, 1], gamma: 1, lam: 1 });
    expect(Array.from(adv)).toEqual([3, 2]);
  });

  it('truncates at episode boundaries', () => {
    const adv = computeGae({
      rewards: [5, 7],
      values: [0, 100, 0],
      dones: [1, 1],
      gamma: 0.9,
      lam: 0.9,
    });
    // the first delta must not see values[1] because done[0] = 1
    expect(adv[0]).toBe(5);
    expect(adv[1]).toBeCloseTo(7 - 100, 12);
  });

  it('matches the brute-force double loop on 1000 random arrays to 1e-10', () => {
    const rng = new Rng(7);
    for (let trial = 0; trial < 1000; trial++) {
      const n = 1 + rng.int(50);
      const rewards = Array.from({ length: n }, () => rng.normal() * 10);
      const values = Array.from({ length: n + 1 }, () => rng.normal() * 10);
      const dones = Array.from({ length: n }, () => (rng.next() < 0.2 ? 1 : 0));
      const gamma = rng.next();
      const lam = rng.next();
      const fast = computeGae({ rewards, values, dones, gamma, lam });
      const slow = bruteForceGae(rewards, values, dones, gamma, lam);
      for (let t = 0; t < n; t++) {
        expect(Math.abs(fast[t]! - slow[t]!)).toBeLessThanOrEqual(1e-10);
      }
    }
  });

  it('rejects mismatched value lengths', () => {
    expect(() =>
      computeGae({ rewards: [1, 2], values: [0, 0], dones: [0, 1], gamma: 0.9, lam: 0.9 }),
    ).toThrow(/values/);
  });
});

describe('advantage helpers', () => {
  it('targets are advantages plus values', () => {
    const adv = new Float64Array([1, 2]);
    const t = advantageTargets(adv, [10, 20, 30]);
    expect(Array.from(t)).toEqual([11, 22]);
  });

  it('normalization centers and scales', () => {
    const out = normalizeAdvantages(new Float64Array([1, 3]));
    expect(out[0]!).toBeCloseTo(-1, 6);
    expect(out[1]!).toBeCloseTo(1, 6);
  });
});
