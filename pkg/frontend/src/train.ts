// Training driver: rollout collection over the environment protocol,
// GAE, PPO updates, greedy evaluation, checkpoints, and the CLI.

import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs } from 'node:util';
import { EnvClient } from './client.js';
import { advantageTargets, computeGae, normalizeAdvantages } from './gae.js';
import { FlatActorCritic } from './flat.js';
import { GraphActorCritic, fullDistribution, type ActorCritic } from './policy.js';
import { DEFAULT_HYPERPARAMS, PpoUpdater, type PpoHyperparams, type Transition } from './ppo.js';
import { Rng } from './rng.js';
import type { EpisodeEndMessage, ObsMessage } from './types.js';

export type Algo = 'graphppo' | 'maskppo' | 'ppo';

export interface TrainConfig {
  algo: Algo;
  envHost: string;
  envPort: number;
  steps: number;
  seed: number;
  /** Instance files cycled per episode during training. */
  instances: string[];
  hyperparams?: Partial<PpoHyperparams>;
  /** Network width (encoder/action-net for graphppo, hidden for flat). */
  width?: number;
  /** Encoder interaction layers (graphppo only). */
  layers?: number;
  /** Called after each iteration; return true to stop early. */
  onIteration?: (point: CurvePoint, model: ActorCritic) => boolean | Promise<boolean>;
}

export interface CurvePoint {
  iteration: number;
  envSteps: number;
  episodes: number;
  meanEpisodeReward: number;
  successRate: number;
  meanRatio: number;
  clipFraction: number;
  entropy: number;
  valueLoss: number;
}

export interface TrainResult {
  model: ActorCritic;
  curve: CurvePoint[];
  envSteps: number;
}

export function makeModel(algo: Algo, fixedSize: number, seed: number, width = 32, layers = 2): ActorCritic {
  const rng = new Rng(seed * 2654435761 + 12345);
  if (algo === 'graphppo') {
    return new GraphActorCritic(
      {
        encoder: { width, layers },
        actionNet: { width, layers: 2 },
        criticHidden: width,
      },
      rng,
    );
  }
  return new FlatActorCritic({ fixedSize, hidden: Math.max(width, 64), masked: algo === 'maskppo' }, rng);
}

function sampleAction(model: ActorCritic, obs: ObsMessage, rng: Rng) {
  const ev = model.evaluate(obs);
  const probs = ev.logp.data.map((lp) => Math.exp(lp));
  const pos = rng.categorical(probs);
  return { ev, pos, slot: ev.slots[pos]! };
}

export function greedyAction(model: ActorCritic, obs: ObsMessage): number {
  const ev = model.evaluate(obs);
  let best = 0;
  for (let i = 1; i < ev.slots.length; i++) {
    if (ev.logp.data[i]! > ev.logp.data[best]!) best = i;
  }
  return ev.slots[best]!;
}

export async function train(config: TrainConfig): Promise<TrainResult> {
  const hp: PpoHyperparams = { ...DEFAULT_HYPERPARAMS, ...config.hyperparams };
  const client = new EnvClient();
  await client.connect(config.envHost, config.envPort);
  const hello = await client.hello();

  let episodeCounter = 0;
  const nextEpisode = async (): Promise<ObsMessage> => {
    const instance = config.instances[episodeCounter % config.instances.length]!;
    const obs = await client.reset(config.seed + episodeCounter, instance);
    episodeCounter += 1;
    return obs;
  };

  let obs = await nextEpisode();
  const fixedSize = hello.fixed_size ?? obs.actions.mask.length;
  const model = makeModel(config.algo, fixedSize, config.seed, config.width, config.layers);
  const updater = new PpoUpdater(model, hp);
  const actRng = new Rng(config.seed + 1013904223);
  const updateRng = new Rng(config.seed + 1664525);

  const curve: CurvePoint[] = [];
  let envSteps = 0;
  let iteration = 0;

  while (envSteps < config.steps) {
    const transitions: Transition[] = [];
    let episodeRewardAcc = 0;
    const episodeRewards: number[] = [];
    const episodeSuccess: boolean[] = [];

    while (transitions.length < hp.rolloutLength && envSteps < config.steps) {
      const { ev, pos, slot } = sampleAction(model, obs, actRng);
      const reply = await client.step(slot);
      envSteps += 1;
      const done = reply.type === 'episode_end';
      const reward = reply.reward;
      transitions.push({
        obs,
        slotPos: pos,
        logpOld: ev.logp.data[pos]!,
        value: ev.value.data[0]!,
        reward,
        done,
      });
      episodeRewardAcc += reward;
      if (done) {
        const end = reply as EpisodeEndMessage;
        episodeRewards.push(episodeRewardAcc);
        episodeSuccess.push(end.metrics.success);
        episodeRewardAcc = 0;
        obs = await nextEpisode();
      } else {
        obs = reply as ObsMessage;
      }
    }

    const n = transitions.length;
    const values = new Float64Array(n + 1);
    for (let t = 0; t < n; t++) values[t] = transitions[t]!.value;
    values[n] = transitions[n - 1]!.done ? 0 : model.evaluate(obs).value.data[0]!;
    const rewards = Float64Array.from(transitions, (tr) => tr.reward);
    const dones = Uint8Array.from(transitions, (tr) => (tr.done ? 1 : 0));
    const adv = computeGae({ rewards, values, dones, gamma: hp.gamma, lam: hp.gaeLambda });
    const targets = advantageTargets(adv, values);
    const diag = updater.update(transitions, normalizeAdvantages(adv), targets, updateRng);

    iteration += 1;
    const point: CurvePoint = {
      iteration,
      envSteps,
      episodes: episodeRewards.length,
      meanEpisodeReward: episodeRewards.length
        ? episodeRewards.reduce((a, b) => a + b, 0) / episodeRewards.length
        : 0,
      successRate: episodeSuccess.length
        ? episodeSuccess.filter(Boolean).length / episodeSuccess.length
        : 0,
      meanRatio: diag.meanRatio,
      clipFraction: diag.clipFraction,
      entropy: diag.entropy,
      valueLoss: diag.valueLoss,
    };
    curve.push(point);
    if (config.onIteration && (await config.onIteration(point, model))) break;
  }

  client.close();
  return { model, curve, envSteps };
}

// ---------------------------------------------------------------------------
// greedy evaluation

export interface EvalEpisode {
  success: boolean;
  totalTime: number;
  reward: number;
}

export interface EvalResult {
  successRate: number;
  meanTotalTime: number;
  meanReward: number;
  episodes: number;
  perEpisode: EvalEpisode[];
}

export async function evaluateGreedy(
  model: ActorCritic,
  envHost: string,
  envPort: number,
  instances: string[],
  seeds: number[],
  maxSteps = 200,
): Promise<EvalResult> {
  const client = new EnvClient();
  await client.connect(envHost, envPort);
  const perEpisode: EvalEpisode[] = [];
  for (let k = 0; k < instances.length; k++) {
    let obs = await client.reset(seeds[k % seeds.length]!, instances[k]!);
    let ended = false;
    for (let s = 0; s < maxSteps && !ended; s++) {
      const reply = await client.step(greedyAction(model, obs));
      if (reply.type === 'episode_end') {
        perEpisode.push({
          success: reply.metrics.success,
          totalTime: reply.metrics.total_time_h,
          reward: reply.metrics.reward_total,
        });
        ended = true;
      } else {
        obs = reply;
      }
    }
    // step cap reached without episode_end counts as a failure
    if (!ended) perEpisode.push({ success: false, totalTime: Infinity, reward: -Infinity });
  }
  client.close();
  const episodes = perEpisode.length;
  const mean = (f: (e: EvalEpisode) => number) =>
    perEpisode.reduce((a, e) => a + f(e), 0) / Math.max(1, episodes);
  return {
    successRate: mean((e) => (e.success ? 1 : 0)),
    meanTotalTime: mean((e) => e.totalTime),
    meanReward: mean((e) => e.reward),
    episodes,
    perEpisode,
  };
}

// ---------------------------------------------------------------------------
// checkpoints and learning curves

export function saveCheckpoint(model: ActorCritic, algo: Algo, file: string): void {
  const params = model.parameters().map((p) => Array.from(p.data));
  fs.writeFileSync(file, JSON.stringify({ algo, params }));
}

export function loadCheckpointInto(model: ActorCritic, file: string): void {
  const doc = JSON.parse(fs.readFileSync(file, 'utf-8')) as { params: number[][] };
  const params = model.parameters();
  if (doc.params.length !== params.length) {
    throw new Error(`checkpoint has ${doc.params.length} tensors, model expects ${params.length}`);
  }
  for (let i = 0; i < params.length; i++) {
    if (doc.params[i]!.length !== params[i]!.size) {
      throw new Error(`checkpoint tensor ${i} size mismatch`);
    }
    params[i]!.data.set(doc.params[i]!);
  }
}

export function saveCurve(curve: CurvePoint[], file: string): void {
  const header =
    'iteration,env_steps,episodes,mean_episode_reward,success_rate,mean_ratio,clip_fraction,entropy,value_loss\n';
  const rows = curve
    .map(
      (p) =>
        `${p.iteration},${p.envSteps},${p.episodes},${p.meanEpisodeReward},${p.successRate},` +
        `${p.meanRatio},${p.clipFraction},${p.entropy},${p.valueLoss}`,
    )
    .join('\n');
  fs.writeFileSync(file, header + rows + '\n');
}

// ---------------------------------------------------------------------------
// CLI

function collectInstances(spec: string): string[] {
  const stat = fs.statSync(spec);
  if (stat.isDirectory()) {
    return fs
      .readdirSync(spec)
      .filter((f) => f.endsWith('.json'))
      .sort()
      .map((f) => path.join(spec, f));
  }
  return spec.split(',');
}

export async function main(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      algo: { type: 'string', default: 'graphppo' },
      env: { type: 'string', default: 'tcp:5555' },
      steps: { type: 'string', default: '200000' },
      seed: { type: 'string', default: '0' },
      instances: { type: 'string' },
      width: { type: 'string', default: '32' },
      rollout: { type: 'string', default: '1024' },
      out: { type: 'string', default: 'checkpoint.json' },
      curve: { type: 'string', default: 'curve.csv' },
    },
  });
  const algo = values.algo as Algo;
  if (!['graphppo', 'maskppo', 'ppo'].includes(algo)) {
    console.error(`unknown algo ${algo}`);
    return 2;
  }
  if (!values.instances) {
    console.error('pass --instances DIR or a comma-separated file list');
    return 2;
  }
  const m = /^tcp:(?:([^:]+):)?(\d+)$/.exec(values.env!);
  if (!m) {
    console.error(`bad --env ${values.env}; expected tcp:PORT or tcp:HOST:PORT`);
    return 2;
  }
  const result = await train({
    algo,
    envHost: m[1] ?? '127.0.0.1',
    envPort: Number(m[2]),
    steps: Number(values.steps),
    seed: Number(values.seed),
    instances: collectInstances(values.instances),
    width: Number(values.width),
    hyperparams: { rolloutLength: Number(values.rollout) },
    onIteration: (p) => {
      console.log(
        `iter ${p.iteration} steps ${p.envSteps} reward ${p.meanEpisodeReward.toFixed(1)} ` +
          `success ${p.successRate.toFixed(2)} ratio ${p.meanRatio.toFixed(3)}`,
      );
      return false;
    },
  });
  saveCheckpoint(result.model, algo, values.out!);
  saveCurve(result.curve, values.curve!);
  console.log(`trained ${result.envSteps} steps; wrote ${values.out} and ${values.curve}`);
  return 0;
}

const entry = process.argv[1] ?? '';
if (entry.endsWith('train.ts') || entry.endsWith('train.js')) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
