// Action network, critic head, and masked categorical distribution.
//
// Only feasible actions enter the action graph (one node each). Layers
// combine a self term with the mean over all action nodes (the complete
// action graph with self-loops under symmetric normalization has uniform
// 1/k weights, so the neighbor aggregate is exactly the mean). Logits are
// inner products with a projection of the state embedding z; masked
// fixed-size slots receive probability exactly 0 at the interface.
//
// The printed-literal flag keeps only the self term in the aggregation, the
// form some write-ups print; it is off by default.

import {
  Tensor,
  add,
  addBias,
  dotRows,
  logSoftmax,
  matmul,
  meanRows,
  relu,
  stackRows,
} from './tensor.js';
import { Rng } from './rng.js';
import { HeteroEncoder, type EncoderConfig, DEFAULT_ENCODER } from './encoder.js';
import { ACTION_FEATS, type ObsMessage } from './types.js';

export interface ActionNetConfig {
  width: number;
  layers: number;
  printedLiteral?: boolean;
}

export const DEFAULT_ACTION_NET: ActionNetConfig = { width: 64, layers: 2 };

export class ActionNet {
  readonly config: ActionNetConfig;
  readonly inputWeight: Tensor;
  readonly inputBias: Tensor;
  readonly selfWeights: Tensor[] = [];
  readonly neighborWeights: Tensor[] = [];
  readonly biases: Tensor[] = [];
  readonly zProjWeight: Tensor;
  readonly zProjBias: Tensor;

  constructor(config: ActionNetConfig, zWidth: number, rng: Rng) {
    this.config = config;
    const w = config.width;
    this.inputWeight = Tensor.param(ACTION_FEATS, w, rng);
    this.inputBias = new Tensor(1, w, undefined, true);
    for (let l = 0; l < config.layers; l++) {
      this.selfWeights.push(Tensor.param(w, w, rng));
      this.neighborWeights.push(Tensor.param(w, w, rng));
      this.biases.push(new Tensor(1, w, undefined, true));
    }
    this.zProjWeight = Tensor.param(zWidth, w, rng);
    this.zProjBias = new Tensor(1, w, undefined, true);
  }

  parameters(): Tensor[] {
    return [
      this.inputWeight,
      this.inputBias,
      ...this.selfWeights,
      ...this.neighborWeights,
      ...this.biases,
      this.zProjWeight,
      this.zProjBias,
    ];
  }

  /** Logits for the k feasible actions given their feature rows and z. */
  logits(actionFeats: Tensor, z: Tensor): Tensor {
    let h = addBias(matmul(actionFeats, this.inputWeight), this.inputBias);
    for (let l = 0; l < this.config.layers; l++) {
      const selfTerm = matmul(h, this.selfWeights[l]!);
      if (this.config.printedLiteral) {
        h = relu(addBias(selfTerm, this.biases[l]!));
        continue;
      }
      const neighborTerm = matmul(
        stackRows(Array.from({ length: h.rows }, () => meanRows(h))),
        this.neighborWeights[l]!,
      );
      h = relu(addBias(add(selfTerm, neighborTerm), this.biases[l]!));
    }
    const zProj = addBias(matmul(z, this.zProjWeight), this.zProjBias);
    return dotRows(h, zProj);
  }
}

export class Critic {
  readonly hiddenWeight: Tensor;
  readonly hiddenBias: Tensor;
  readonly outWeight: Tensor;
  readonly outBias: Tensor;

  constructor(zWidth: number, hidden: number, rng: Rng) {
    this.hiddenWeight = Tensor.param(zWidth, hidden, rng);
    this.hiddenBias = new Tensor(1, hidden, undefined, true);
    this.outWeight = Tensor.param(hidden, 1, rng);
    this.outBias = new Tensor(1, 1, undefined, true);
  }

  parameters(): Tensor[] {
    return [this.hiddenWeight, this.hiddenBias, this.outWeight, this.outBias];
  }

  value(z: Tensor): Tensor {
    const h = relu(addBias(matmul(z, this.hiddenWeight), this.hiddenBias));
    return addBias(matmul(h, this.outWeight), this.outBias);
  }
}

// ---------------------------------------------------------------------------
// actor-critic interface shared by the graph model and the flat baselines

export interface Evaluation {
  /** Log probabilities, one row per candidate slot, aligned with `slots`. */
  logp: Tensor;
  /** Action-slot indices the distribution ranges over. */
  slots: number[];
  /** State value estimate (1 x 1). */
  value: Tensor;
}

export interface ActorCritic {
  parameters(): Tensor[];
  evaluate(obs: ObsMessage): Evaluation;
  /** Whether the candidate set is restricted to masked-feasible slots. */
  readonly masked: boolean;
}

/** Probability vector over all fixed-size slots, exactly 0 off-candidate. */
export function fullDistribution(ev: Evaluation, fixedSize: number): Float64Array {
  const probs = new Float64Array(fixedSize);
  for (let i = 0; i < ev.slots.length; i++) {
    probs[ev.slots[i]!] = Math.exp(ev.logp.data[i]!);
  }
  return probs;
}

export function feasibleSlots(mask: number[]): number[] {
  const out: number[] = [];
  for (let i = 0; i < mask.length; i++) if (mask[i]) out.push(i);
  return out;
}

export interface GraphModelConfig {
  encoder: EncoderConfig;
  actionNet: ActionNetConfig;
  criticHidden: number;
}

export const DEFAULT_GRAPH_MODEL: GraphModelConfig = {
  encoder: DEFAULT_ENCODER,
  actionNet: DEFAULT_ACTION_NET,
  criticHidden: 256,
};

export class GraphActorCritic implements ActorCritic {
  readonly masked = true;
  readonly encoder: HeteroEncoder;
  readonly actionNet: ActionNet;
  readonly critic: Critic;

  constructor(config: GraphModelConfig, rng: Rng) {
    this.encoder = new HeteroEncoder(config.encoder, rng);
    const zWidth = 3 * config.encoder.width;
    this.actionNet = new ActionNet(config.actionNet, zWidth, rng);
    this.critic = new Critic(zWidth, config.criticHidden, rng);
  }

  parameters(): Tensor[] {
    return [
      ...this.encoder.parameters(),
      ...this.actionNet.parameters(),
      ...this.critic.parameters(),
    ];
  }

  evaluate(obs: ObsMessage): Evaluation {
    const slots = feasibleSlots(obs.actions.mask);
    if (slots.length === 0) throw new Error('no feasible action in observation');
    const { z } = this.encoder.forward(obs.state);
    const feats = Tensor.fromArray(slots.map((s) => obs.actions.feats[s]!));
    const logits = this.actionNet.logits(feats, z);
    return { logp: logSoftmax(logits), slots, value: this.critic.value(z) };
  }
}
