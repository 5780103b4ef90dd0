// Shared test fixtures: synthetic observations shaped like the wire protocol.

import { Rng } from '../src/rng.js';
import type { ObsMessage, StatePayload } from '../src/types.js';

export function makeState(counts: { trucks: number; deliveries: number; chargers: number }, rng: Rng): StatePayload {
  const truck_feats = Array.from({ length: counts.trucks }, () =>
    Array.from({ length: 5 }, () => rng.next()),
  );
  const truck_status_onehot = Array.from({ length: counts.trucks }, () => {
    const onehot = new Array<number>(6).fill(0);
    onehot[rng.int(6)] = 1;
    return onehot;
  });
  const delivery_feats = Array.from({ length: counts.deliveries }, () =>
    Array.from({ length: 2 }, () => rng.next()),
  );
  const charger_feats = Array.from({ length: counts.chargers }, () =>
    Array.from({ length: 6 }, () => rng.next()),
  );

  const entities: [string, number][] = [];
  for (let i = 0; i < counts.trucks; i++) entities.push(['truck', i]);
  for (let i = 0; i < counts.deliveries; i++) entities.push(['delivery', i]);
  for (let i = 0; i < counts.chargers; i++) entities.push(['charger', i]);
  const edges: StatePayload['edges'] = [];
  for (const [st, si] of entities) {
    for (const [dt, di] of entities) {
      if (st === dt && si === di) continue;
      edges.push([st, si, dt, di, rng.next(), rng.next()]);
    }
  }
  return { truck_feats, truck_status_onehot, delivery_feats, charger_feats, edges };
}

export function makeObs(
  counts: { trucks: number; deliveries: number; chargers: number },
  fixedSize: number,
  rng: Rng,
  mask?: number[],
): ObsMessage {
  const state = makeState(counts, rng);
  const feats = Array.from({ length: fixedSize }, () => [
    [0, 0.5, 1][rng.int(3)]!,
    rng.next(),
    rng.next() * 2,
  ]);
  let m = mask;
  if (!m) {
    m = Array.from({ length: fixedSize }, () => (rng.next() < 0.5 ? 1 : 0));
    if (!m.some((x) => x === 1)) m[rng.int(fixedSize)] = 1;
  }
  return {
    type: 'obs',
    episode_step: 0,
    active_truck: 0,
    state,
    actions: { feats, mask: m },
    reward: 0,
    done: false,
    info: {},
  };
}

/** Relabel delivery nodes by a permutation, rewriting edge endpoints. */
export function permuteDeliveries(state: StatePayload, perm: number[]): StatePayload {
  const inverse = new Array<number>(perm.length);
  for (let i = 0; i < perm.length; i++) inverse[perm[i]!] = i;
  return {
    ...state,
    delivery_feats: perm.map((i) => state.delivery_feats[i]!),
    edges: state.edges.map(([st, si, dt, di, tau, e]) => [
      st,
      st === 'delivery' ? inverse[si]! : si,
      dt,
      dt === 'delivery' ? inverse[di]! : di,
      tau,
      e,
    ]),
  };
}
