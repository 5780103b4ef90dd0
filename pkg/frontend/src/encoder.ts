// Heterogeneous message-passing encoder over the observation state graph.
//
// Per-type affine input encoders project raw features to a common width F.
// Each of L interaction layers computes relation-specific edge messages
//   mu = W_r * (h_sender (+) h_receiver (+) edge_feats) + b_r
// aggregates them per receiver with a mean over each relation's neighbors,
// and updates
//   h' = ReLU(W_0 * h + sum_r mean_{u in N_r(v)} mu + b_0).
// The state embedding z concatenates the per-type mean-pooled embeddings.
//
// A compatibility flag reproduces a printed variant that concatenates the
// receiver embedding twice instead of sender (+) receiver; it exists for
// comparison only and is off by default.

import {
  Tensor,
  addBias,
  add,
  concatCols,
  constant,
  matmul,
  meanRows,
  relu,
  row,
  stackRows,
} from './tensor.js';
import { Rng } from './rng.js';
import {
  CHARGER_FEATS,
  DELIVERY_FEATS,
  EDGE_FEATS,
  NODE_TYPES,
  TRUCK_FEATS,
  type NodeType,
  type StatePayload,
} from './types.js';

export interface EncoderConfig {
  /** Embedding width F. */
  width: number;
  /** Number of hetero-interaction layers L. */
  layers: number;
  /** Use the printed receiver-(+)-receiver message inputs. */
  printedLiteral?: boolean;
}

export const DEFAULT_ENCODER: EncoderConfig = { width: 256, layers: 3 };

const INPUT_DIMS: Record<NodeType, number> = {
  truck: TRUCK_FEATS,
  delivery: DELIVERY_FEATS,
  charger: CHARGER_FEATS,
};

/** All ordered type pairs; the observation's edge list only ever uses these. */
export const RELATIONS: readonly string[] = NODE_TYPES.flatMap((s) =>
  NODE_TYPES.map((d) => `${s}>${d}`),
);

interface LayerParams {
  relWeight: Map<string, Tensor>; // (2F + EDGE_FEATS) x F
  relBias: Map<string, Tensor>; // 1 x F
  selfWeight: Map<NodeType, Tensor>; // F x F
  selfBias: Map<NodeType, Tensor>; // 1 x F
}

export interface EncoderOutput {
  embeddings: Map<NodeType, Tensor>;
  /** 1 x 3F concatenation of per-type mean pools. */
  z: Tensor;
}

export class HeteroEncoder {
  readonly config: EncoderConfig;
  readonly inputWeight = new Map<NodeType, Tensor>();
  readonly inputBias = new Map<NodeType, Tensor>();
  readonly interactionLayers: LayerParams[] = [];

  constructor(config: EncoderConfig, rng: Rng) {
    this.config = config;
    const f = config.width;
    for (const t of NODE_TYPES) {
      this.inputWeight.set(t, Tensor.param(INPUT_DIMS[t], f, rng));
      this.inputBias.set(t, new Tensor(1, f, undefined, true));
    }
    for (let l = 0; l < config.layers; l++) {
      const layer: LayerParams = {
        relWeight: new Map(),
        relBias: new Map(),
        selfWeight: new Map(),
        selfBias: new Map(),
      };
      for (const r of RELATIONS) {
        layer.relWeight.set(r, Tensor.param(2 * f + EDGE_FEATS, f, rng));
        layer.relBias.set(r, new Tensor(1, f, undefined, true));
      }
      for (const t of NODE_TYPES) {
        layer.selfWeight.set(t, Tensor.param(f, f, rng));
        layer.selfBias.set(t, new Tensor(1, f, undefined, true));
      }
      this.interactionLayers.push(layer);
    }
  }

  parameters(): Tensor[] {
    const out: Tensor[] = [];
    for (const t of NODE_TYPES) out.push(this.inputWeight.get(t)!, this.inputBias.get(t)!);
    for (const layer of this.interactionLayers) {
      for (const r of RELATIONS) out.push(layer.relWeight.get(r)!, layer.relBias.get(r)!);
      for (const t of NODE_TYPES) out.push(layer.selfWeight.get(t)!, layer.selfBias.get(t)!);
    }
    return out;
  }

  private rawFeatures(state: StatePayload): Map<NodeType, Tensor> {
    const truckRows = state.truck_feats.map((feats, i) => [
      ...feats,
      ...state.truck_status_onehot[i]!,
    ]);
    return new Map<NodeType, Tensor>([
      ['truck', Tensor.fromArray(truckRows.length ? truckRows : [])],
      ['delivery', Tensor.fromArray(state.delivery_feats)],
      ['charger', Tensor.fromArray(state.charger_feats)],
    ]);
  }

  forward(state: StatePayload): EncoderOutput {
    const f = this.config.width;
    let h = new Map<NodeType, Tensor>();
    const raw = this.rawFeatures(state);
    for (const t of NODE_TYPES) {
      const x = raw.get(t)!;
      h.set(
        t,
        x.rows > 0
          ? addBias(matmul(x, this.inputWeight.get(t)!), this.inputBias.get(t)!)
          : new Tensor(0, f),
      );
    }

    for (const layer of this.interactionLayers) {
      // collect message inputs per (relation, receiver)
      const inbox = new Map<string, Tensor[]>(); // `${rel}#${dstType}#${dstIdx}` -> messages
      for (const [srcType, srcIdx, dstType, dstIdx, tau, e] of state.edges) {
        const rel = `${srcType}>${dstType}`;
        const hs = row(h.get(srcType as NodeType)!, srcIdx);
        const hd = row(h.get(dstType as NodeType)!, dstIdx);
        const first = this.config.printedLiteral ? hd : hs;
        const input = concatCols([first, hd, constant([tau, e], 1, EDGE_FEATS)]);
        const mu = addBias(matmul(input, layer.relWeight.get(rel)!), layer.relBias.get(rel)!);
        const key = `${rel}#${dstType}#${dstIdx}`;
        const list = inbox.get(key);
        if (list) list.push(mu);
        else inbox.set(key, [mu]);
      }

      const next = new Map<NodeType, Tensor>();
      for (const t of NODE_TYPES) {
        const cur = h.get(t)!;
        if (cur.rows === 0) {
          next.set(t, cur);
          continue;
        }
        const rows: Tensor[] = [];
        for (let v = 0; v < cur.rows; v++) {
          let acc = addBias(
            matmul(row(cur, v), layer.selfWeight.get(t)!),
            layer.selfBias.get(t)!,
          );
          for (const s of NODE_TYPES) {
            const msgs = inbox.get(`${s}>${t}#${t}#${v}`);
            if (msgs) acc = add(acc, meanRows(stackRows(msgs)));
          }
          rows.push(relu(acc));
        }
        next.set(t, stackRows(rows));
      }
      h = next;
    }

    const pools = NODE_TYPES.map((t) => {
      const emb = h.get(t)!;
      return emb.rows > 0 ? meanRows(emb) : new Tensor(1, f);
    });
    return { embeddings: h, z: concatCols(pools) };
  }
}
