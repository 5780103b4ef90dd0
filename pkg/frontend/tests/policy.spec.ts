import { describe, expect, it } from 'vitest';
import { FlatActorCritic } from '../src/flat.js';
import { GraphActorCritic, fullDistribution } from '../src/policy.js';
import { Rng } from '../src/rng.js';
import { makeObs } from './helpers.js';

const MODEL = {
  encoder: { width: 8, layers: 1 },
  actionNet: { width: 8, layers: 2 },
  criticHidden: 8,
};

describe('masked action distribution', () => {
  it('places exactly zero mass on masked slots over 10^4 sampled distributions', () => {
    const model = new GraphActorCritic(MODEL, new Rng(1));
    const rng = new Rng(2);
    for (let trial = 0; trial < 10_000; trial++) {
      const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, rng);
      const ev = model.evaluate(obs);
      const probs = fullDistribution(ev, 15);
      let feasibleMass = 0;
      for (let i = 0; i < 15; i++) {
        if (obs.actions.mask[i]) feasibleMass += probs[i]!;
        else expect(probs[i]).toBe(0);
      }
      expect(Math.abs(feasibleMass - 1)).toBeLessThanOrEqual(1e-6);
    }
  });

  it('is uniform over identical feasible action features', () => {
    const rng = new Rng(3);
    const model = new GraphActorCritic(MODEL, new Rng(4));
    const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, rng, [
      1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
    ]);
    obs.actions.feats[1] = [...obs.actions.feats[0]!];
    obs.actions.feats[2] = [...obs.actions.feats[0]!];
    const probs = fullDistribution(model.evaluate(obs), 15);
    expect(probs[0]).toBeCloseTo(1 / 3, 9);
    expect(probs[1]).toBeCloseTo(1 / 3, 9);
    expect(probs[2]).toBeCloseTo(1 / 3, 9);
  });

  it('assigns probability one to a single feasible action', () => {
    const rng = new Rng(5);
    const model = new GraphActorCritic(MODEL, new Rng(6));
    const mask = new Array<number>(15).fill(0);
    mask[7] = 1;
    const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, rng, mask);
    const probs = fullDistribution(model.evaluate(obs), 15);
    expect(probs[7]).toBe(1);
  });

  it('throws when every slot is masked', () => {
    const rng = new Rng(7);
    const model = new GraphActorCritic(MODEL, new Rng(8));
    const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, rng);
    obs.actions.mask = new Array<number>(15).fill(0);
    expect(() => model.evaluate(obs)).toThrow(/feasible/);
  });
});

describe('flat baselines', () => {
  it('masked flat model also has exact zero mass off the mask', () => {
    const model = new FlatActorCritic({ fixedSize: 15, hidden: 16, masked: true }, new Rng(9));
    const rng = new Rng(10);
    for (let trial = 0; trial < 200; trial++) {
      const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, rng);
      const probs = fullDistribution(model.evaluate(obs), 15);
      for (let i = 0; i < 15; i++) {
        if (!obs.actions.mask[i]) expect(probs[i]).toBe(0);
      }
    }
  });

  it('unmasked flat model spreads mass over every slot', () => {
    const model = new FlatActorCritic({ fixedSize: 15, hidden: 16, masked: false }, new Rng(11));
    const obs = makeObs({ trucks: 1, deliveries: 2, chargers: 1 }, 15, new Rng(12));
    const probs = fullDistribution(model.evaluate(obs), 15);
    let sum = 0;
    for (let i = 0; i < 15; i++) {
      expect(probs[i]!).toBeGreaterThan(0);
      sum += probs[i]!;
    }
    expect(sum).toBeCloseTo(1, 9);
  });

  it('critic value is a finite scalar', () => {
    const model = new GraphActorCritic(MODEL, new Rng(13));
    const obs = makeObs({ trucks: 2, deliveries: 3, chargers: 2 }, 15, new Rng(14));
    const ev = model.evaluate(obs);
    expect(ev.value.rows).toBe(1);
    expect(ev.value.cols).toBe(1);
    expect(Number.isFinite(ev.value.data[0]!)).toBe(true);
  });
});
