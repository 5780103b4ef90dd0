export { Rng } from './rng.js';
export * from './tensor.js';
export { computeGae, advantageTargets, normalizeAdvantages } from './gae.js';
export { HeteroEncoder, RELATIONS, DEFAULT_ENCODER, type EncoderConfig } from './encoder.js';
export {
  ActionNet,
  Critic,
  GraphActorCritic,
  DEFAULT_ACTION_NET,
  DEFAULT_GRAPH_MODEL,
  feasibleSlots,
  fullDistribution,
  type ActorCritic,
  type Evaluation,
} from './policy.js';
export { FlatActorCritic, flattenObs, flatInputWidth } from './flat.js';
export { PpoUpdater, DEFAULT_HYPERPARAMS, type PpoHyperparams, type Transition } from './ppo.js';
export { Adam } from './optim.js';
export { EnvClient, ProtocolError } from './client.js';
export {
  train,
  evaluateGreedy,
  makeModel,
  greedyAction,
  saveCheckpoint,
  loadCheckpointInto,
  saveCurve,
  type TrainConfig,
  type CurvePoint,
  type TrainResult,
  type Algo,
} from './train.js';
export * from './types.js';
