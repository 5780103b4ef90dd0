// Generalized advantage estimation over a rollout buffer.
//
// advantages[t] = sum_h (gamma*lam)^h * delta[t+h], with
// delta[t] = r[t] + gamma * V(s[t+1]) * (1 - done[t]) - V(s[t]),
// truncated at episode boundaries (done[t] = 1).

export interface GaeInputs {
  rewards: Float64Array | number[];
  /** V(s[t]) for each step, plus one bootstrap value V(s[T]) at the end. */
  values: Float64Array | number[];
  dones: Uint8Array | number[];
  gamma: number;
  lam: number;
}

export function computeGae(inputs: GaeInputs): Float64Array {
  const { rewards, values, dones, gamma, lam } = inputs;
  const n = rewards.length;
  if (values.length !== n + 1) {
    throw new Error(`values must have length ${n + 1} (one bootstrap entry), got ${values.length}`);
  }
  if (dones.length !== n) throw new Error('dones length mismatch');
  if (gamma < 0 || gamma > 1 || lam < 0 || lam > 1) throw new Error('gamma and lam must be in [0,1]');
  const adv = new Float64Array(n);
  let carry = 0;
  for (let t = n - 1; t >= 0; t--) {
    const nonTerminal = dones[t]! ? 0 : 1;
    const delta = rewards[t]! + gamma * values[t + 1]! * nonTerminal - values[t]!;
    carry = delta + gamma * lam * nonTerminal * carry;
    adv[t] = carry;
  }
  return adv;
}

/** Discounted returns-to-go targets: advantages + values (value-loss targets). */
export function advantageTargets(adv: Float64Array, values: Float64Array | number[]): Float64Array {
  const out = new Float64Array(adv.length);
  for (let t = 0; t < adv.length; t++) out[t] = adv[t]! + values[t]!;
  return out;
}

export function normalizeAdvantages(adv: Float64Array): Float64Array {
  const n = adv.length;
  if (n === 0) return adv;
  let mean = 0;
  for (let t = 0; t < n; t++) mean += adv[t]!;
  mean /= n;
  let varSum = 0;
  for (let t = 0; t < n; t++) varSum += (adv[t]! - mean) ** 2;
  const std = Math.sqrt(varSum / n) + 1e-8;
  const out = new Float64Array(n);
  for (let t = 0; t < n; t++) out[t] = (adv[t]! - mean) / std;
  return out;
}
