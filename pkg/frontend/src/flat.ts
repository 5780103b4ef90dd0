// Flattened-feature actor-critic baselines.
//
// MaskPPO flattens the observation into a fixed-size vector and restricts
// the categorical distribution to masked-feasible slots; PPO uses the same
// network but samples over every slot, so it can pick infeasible actions
// and take the failure penalty.

import { Tensor, addBias, logSoftmax, matmul, relu, stackRows } from './tensor.js';
import { Rng } from './rng.js';
import { feasibleSlots, type ActorCritic, type Evaluation } from './policy.js';
import {
  ACTION_FEATS,
  CHARGER_FEATS,
  DELIVERY_FEATS,
  TRUCK_FEATS,
  type ObsMessage,
} from './types.js';

export interface FlatModelConfig {
  fixedSize: number;
  hidden: number;
  masked: boolean;
}

function meanOf(rows: number[][], width: number): number[] {
  const out = new Array<number>(width).fill(0);
  if (rows.length === 0) return out;
  for (const r of rows) {
    for (let j = 0; j < width; j++) out[j]! += r[j]! / rows.length;
  }
  return out;
}

export function flattenObs(obs: ObsMessage, fixedSize: number): number[] {
  const active = Math.max(0, obs.active_truck);
  const truck = [
    ...(obs.state.truck_feats[active] ?? new Array(5).fill(0)),
    ...(obs.state.truck_status_onehot[active] ?? new Array(6).fill(0)),
  ];
  const deliveries = meanOf(obs.state.delivery_feats, DELIVERY_FEATS);
  const chargers = meanOf(obs.state.charger_feats, CHARGER_FEATS);
  const actions = new Array<number>(fixedSize * ACTION_FEATS).fill(0);
  for (let i = 0; i < Math.min(fixedSize, obs.actions.feats.length); i++) {
    for (let j = 0; j < ACTION_FEATS; j++) actions[i * ACTION_FEATS + j] = obs.actions.feats[i]![j]!;
  }
  return [...truck, ...deliveries, ...chargers, ...actions];
}

export function flatInputWidth(fixedSize: number): number {
  return TRUCK_FEATS + DELIVERY_FEATS + CHARGER_FEATS + fixedSize * ACTION_FEATS;
}

export class FlatActorCritic implements ActorCritic {
  readonly masked: boolean;
  readonly fixedSize: number;
  readonly w1: Tensor;
  readonly b1: Tensor;
  readonly w2: Tensor;
  readonly b2: Tensor;
  readonly policyWeight: Tensor;
  readonly policyBias: Tensor;
  readonly valueWeight: Tensor;
  readonly valueBias: Tensor;

  constructor(config: FlatModelConfig, rng: Rng) {
    this.masked = config.masked;
    this.fixedSize = config.fixedSize;
    const input = flatInputWidth(config.fixedSize);
    const h = config.hidden;
    this.w1 = Tensor.param(input, h, rng);
    this.b1 = new Tensor(1, h, undefined, true);
    this.w2 = Tensor.param(h, h, rng);
    this.b2 = new Tensor(1, h, undefined, true);
    this.policyWeight = Tensor.param(h, config.fixedSize, rng);
    this.policyBias = new Tensor(1, config.fixedSize, undefined, true);
    this.valueWeight = Tensor.param(h, 1, rng);
    this.valueBias = new Tensor(1, 1, undefined, true);
  }

  parameters(): Tensor[] {
    return [
      this.w1,
      this.b1,
      this.w2,
      this.b2,
      this.policyWeight,
      this.policyBias,
      this.valueWeight,
      this.valueBias,
    ];
  }

  evaluate(obs: ObsMessage): Evaluation {
    const x = Tensor.fromArray([flattenObs(obs, this.fixedSize)]);
    const h1 = relu(addBias(matmul(x, this.w1), this.b1));
    const h2 = relu(addBias(matmul(h1, this.w2), this.b2));
    const allLogits = addBias(matmul(h2, this.policyWeight), this.policyBias); // 1 x fixedSize
    const value = addBias(matmul(h2, this.valueWeight), this.valueBias);
    const slots = this.masked
      ? feasibleSlots(obs.actions.mask)
      : Array.from({ length: this.fixedSize }, (_, i) => i);
    if (slots.length === 0) throw new Error('no feasible action in observation');
    // gather candidate logits into an (k x 1) column for the masked softmax
    const logits = stackRows(slots.map((s) => sliceEntry(allLogits, s)));
    return { logp: logSoftmax(logits), slots, value };
  }
}

/** (1 x n) -> (1 x 1) entry with scatter-add backward. */
function sliceEntry(rowTensor: Tensor, j: number): Tensor {
  const out = new Tensor(1, 1, undefined, false, [rowTensor]);
  out.data[0] = rowTensor.data[j]!;
  if (out.requiresGrad) {
    out.backwardFn = (g) => {
      if (rowTensor.requiresGrad) rowTensor.ensureGrad()[j] += g[0]!;
    };
  }
  return out;
}
