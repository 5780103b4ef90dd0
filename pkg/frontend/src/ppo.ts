// Clipped-surrogate PPO update over stored rollout transitions.
//
// Per transition the loss is
//   -min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)
//   + vfCoef * (V(s) - target)^2 - entCoef * H(pi(.|s)),
// averaged over the minibatch; ratio = exp(logpi(a|s) - logpi_old(a|s)).

import {
  Tensor,
  backward,
  clip,
  constant,
  exp,
  meanAll,
  minimum,
  mul,
  row,
  scale,
  square,
  stackRows,
  sub,
  sumAll,
  zeroGrads,
} from './tensor.js';
import { Adam } from './optim.js';
import { Rng } from './rng.js';
import type { ActorCritic } from './policy.js';
import type { ObsMessage } from './types.js';

export interface PpoHyperparams {
  gamma: number;
  gaeLambda: number;
  clipEpsilon: number;
  rolloutLength: number;
  epochs: number;
  minibatchSize: number;
  entropyCoef: number;
  valueCoef: number;
  learningRate: number;
}

export const DEFAULT_HYPERPARAMS: PpoHyperparams = {
  gamma: 0.99,
  gaeLambda: 0.95,
  clipEpsilon: 0.2,
  rolloutLength: 2048,
  epochs: 10,
  minibatchSize: 256,
  entropyCoef: 0.01,
  valueCoef: 0.5,
  learningRate: 3e-4,
};

export interface Transition {
  obs: ObsMessage;
  /** Position of the chosen action within the evaluation's slot list. */
  slotPos: number;
  logpOld: number;
  value: number;
  reward: number;
  done: boolean;
}

export interface UpdateDiagnostics {
  meanRatio: number;
  clipFraction: number;
  policyLoss: number;
  valueLoss: number;
  entropy: number;
}

export class PpoUpdater {
  readonly optimizer: Adam;

  constructor(
    readonly model: ActorCritic,
    readonly hp: PpoHyperparams,
  ) {
    this.optimizer = new Adam(model.parameters(), hp.learningRate);
  }

  /**
   * Loss over one minibatch as a scalar tensor plus sampled diagnostics.
   * Exposed separately so gradients can be checked against finite
   * differences without touching the optimizer.
   */
  loss(
    batch: Transition[],
    advantages: Float64Array,
    targets: Float64Array,
    diag?: UpdateDiagnostics,
  ): Tensor {
    const perSample: Tensor[] = [];
    let ratioSum = 0;
    let clipped = 0;
    let entropySum = 0;
    let vlossSum = 0;
    let plossSum = 0;
    for (let i = 0; i < batch.length; i++) {
      const tr = batch[i]!;
      const ev = this.model.evaluate(tr.obs);
      const lp = row(ev.logp, tr.slotPos);
      const ratio = exp(sub(lp, constant([tr.logpOld], 1, 1)));
      const adv = advantages[i]!;
      const surr = minimum(scale(ratio, adv), scale(clip(ratio, 1 - this.hp.clipEpsilon, 1 + this.hp.clipEpsilon), adv));
      const vErr = sub(ev.value, constant([targets[i]!], 1, 1));
      const vloss = square(vErr);
      const entropy = scale(sumAll(mul(exp(ev.logp), ev.logp)), -1);
      const sample = sub(
        sub(scale(vloss, this.hp.valueCoef), surr),
        scale(entropy, this.hp.entropyCoef),
      );
      perSample.push(sample);

      const r = ratio.data[0]!;
      ratioSum += r;
      if (Math.abs(r - 1) > this.hp.clipEpsilon) clipped += 1;
      entropySum += entropy.data[0]!;
      vlossSum += vloss.data[0]!;
      plossSum -= surr.data[0]!;
    }
    if (diag) {
      diag.meanRatio = ratioSum / batch.length;
      diag.clipFraction = clipped / batch.length;
      diag.entropy = entropySum / batch.length;
      diag.valueLoss = vlossSum / batch.length;
      diag.policyLoss = plossSum / batch.length;
    }
    return meanAll(stackRows(perSample));
  }

  /** One full update phase: epochs of shuffled minibatch gradient steps. */
  update(
    transitions: Transition[],
    advantages: Float64Array,
    targets: Float64Array,
    rng: Rng,
  ): UpdateDiagnostics {
    const n = transitions.length;
    const diag: UpdateDiagnostics = {
      meanRatio: 0,
      clipFraction: 0,
      policyLoss: 0,
      valueLoss: 0,
      entropy: 0,
    };
    const order = Array.from({ length: n }, (_, i) => i);
    const params = this.model.parameters();
    for (let epoch = 0; epoch < this.hp.epochs; epoch++) {
      // Fisher-Yates shuffle with the training RNG
      for (let i = n - 1; i > 0; i--) {
        const j = rng.int(i + 1);
        [order[i], order[j]] = [order[j]!, order[i]!];
      }
      for (let start = 0; start < n; start += this.hp.minibatchSize) {
        const idx = order.slice(start, start + this.hp.minibatchSize);
        const batch = idx.map((i) => transitions[i]!);
        const adv = Float64Array.from(idx, (i) => advantages[i]!);
        const tgt = Float64Array.from(idx, (i) => targets[i]!);
        zeroGrads(params);
        const lossT = this.loss(batch, adv, tgt, diag);
        if (!Number.isFinite(lossT.data[0]!)) {
          throw new Error(`non-finite PPO loss: ${lossT.data[0]}`);
        }
        backward(lossT);
        this.optimizer.step();
      }
    }
    return diag;
  }
}
