// Minimal reverse-mode autodiff over float64 matrices.
//
// Everything is a row-major (rows x cols) Float64Array. Operations build a
// computation graph; backward(loss) walks it in reverse topological order.
// Float64 is deliberate: the gradient and advantage checks in the test suite
// run at 1e-4 / 1e-10 tolerances that float32 kernels cannot hold.

import { Rng } from './rng.js';

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  readonly data: Float64Array;
  grad: Float64Array | null = null;
  readonly requiresGrad: boolean;
  /** Inputs this tensor was computed from (empty for leaves). */
  readonly parents: Tensor[];
  /** Accumulates parent gradients given this tensor's gradient. */
  backwardFn: ((grad: Float64Array) => void) | null = null;

  constructor(
    rows: number,
    cols: number,
    data?: Float64Array,
    requiresGrad = false,
    parents: Tensor[] = [],
  ) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    this.requiresGrad = requiresGrad || parents.some((p) => p.requiresGrad);
    this.parents = parents;
  }

  get size(): number {
    return this.rows * this.cols;
  }

  static fromArray(values: number[][], requiresGrad = false): Tensor {
    const rows = values.length;
    const cols = rows > 0 ? values[0]!.length : 0;
    const t = new Tensor(rows, cols, undefined, requiresGrad);
    for (let i = 0; i < rows; i++) {
      for (let j = 0; j < cols; j++) t.data[i * cols + j] = values[i]![j]!;
    }
    return t;
  }

  static param(rows: number, cols: number, rng: Rng, scale?: number): Tensor {
    const t = new Tensor(rows, cols, undefined, true);
    const s = scale ?? Math.sqrt(2.0 / Math.max(1, rows));
    for (let i = 0; i < t.size; i++) t.data[i] = rng.normal() * s;
    return t;
  }

  static zeros(rows: number, cols: number, requiresGrad = false): Tensor {
    return new Tensor(rows, cols, undefined, requiresGrad);
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  at(i: number, j: number): number {
    return this.data[i * this.cols + j]!;
  }
}

function make(
  rows: number,
  cols: number,
  parents: Tensor[],
  backwardFn: (out: Tensor, grad: Float64Array) => void,
): Tensor {
  const out = new Tensor(rows, cols, undefined, false, parents);
  if (out.requiresGrad) out.backwardFn = (g) => backwardFn(out, g);
  return out;
}

// ---------------------------------------------------------------------------
// core operations

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch ${a.cols} vs ${b.rows}`);
  const out = make(a.rows, b.cols, [a, b], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let k = 0; k < a.cols; k++) {
          let s = 0;
          for (let j = 0; j < b.cols; j++) s += g[i * b.cols + j]! * b.data[k * b.cols + j]!;
          ga[i * a.cols + k] += s;
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let k = 0; k < b.rows; k++) {
        for (let j = 0; j < b.cols; j++) {
          let s = 0;
          for (let i = 0; i < a.rows; i++) s += a.data[i * a.cols + k]! * g[i * b.cols + j]!;
          gb[k * b.cols + j] += s;
        }
      }
    }
  });
  for (let i = 0; i < a.rows; i++) {
    for (let k = 0; k < a.cols; k++) {
      const av = a.data[i * a.cols + k]!;
      if (av === 0) continue;
      for (let j = 0; j < b.cols; j++) {
        out.data[i * b.cols + j] += av * b.data[k * b.cols + j]!;
      }
    }
  }
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error('add shape mismatch');
  const out = make(a.rows, a.cols, [a, b], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i]!;
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i]! + b.data[i]!;
  return out;
}

/** Add a (1 x cols) bias row to every row of a. */
export function addBias(a: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== a.cols) throw new Error('addBias shape mismatch');
  const out = make(a.rows, a.cols, [a, bias], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i]!;
    }
    if (bias.requiresGrad) {
      const gb = bias.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) gb[j] += g[i * a.cols + j]!;
      }
    }
  });
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < a.cols; j++) out.data[i * a.cols + j] = a.data[i * a.cols + j]! + bias.data[j]!;
  }
  return out;
}

export function sub(a: Tensor, b: Tensor): Tensor {
  return add(a, scale(b, -1));
}

export function scale(a: Tensor, s: number): Tensor {
  const out = make(a.rows, a.cols, [a], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += s * g[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = s * a.data[i]!;
  return out;
}

export function mul(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error('mul shape mismatch');
  const out = make(a.rows, a.cols, [a, b], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i]! * b.data[i]!;
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i]! * a.data[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i]! * b.data[i]!;
  return out;
}

export function relu(a: Tensor): Tensor {
  const out = make(a.rows, a.cols, [a], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += a.data[i]! > 0 ? g[i]! : 0;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = Math.max(0, a.data[i]!);
  return out;
}

export function exp(a: Tensor): Tensor {
  const out = make(a.rows, a.cols, [a], (o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i]! * o.data[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = Math.exp(a.data[i]!);
  return out;
}

export function square(a: Tensor): Tensor {
  return mul(a, a);
}

/** Concatenate along columns: all inputs share the row count. */
export function concatCols(parts: Tensor[]): Tensor {
  const rows = parts[0]!.rows;
  let cols = 0;
  for (const p of parts) {
    if (p.rows !== rows) throw new Error('concatCols row mismatch');
    cols += p.cols;
  }
  const out = make(rows, cols, parts, (_o, g) => {
    let off = 0;
    for (const p of parts) {
      if (p.requiresGrad) {
        const gp = p.ensureGrad();
        for (let i = 0; i < rows; i++) {
          for (let j = 0; j < p.cols; j++) gp[i * p.cols + j] += g[i * cols + off + j]!;
        }
      }
      off += p.cols;
    }
  });
  let off = 0;
  for (const p of parts) {
    for (let i = 0; i < rows; i++) {
      for (let j = 0; j < p.cols; j++) out.data[i * cols + off + j] = p.data[i * p.cols + j]!;
    }
    off += p.cols;
  }
  return out;
}

/** Stack (1 x cols) rows into an (n x cols) matrix. */
export function stackRows(parts: Tensor[]): Tensor {
  const cols = parts[0]!.cols;
  for (const p of parts) {
    if (p.rows !== 1 || p.cols !== cols) throw new Error('stackRows expects 1-row tensors');
  }
  const out = make(parts.length, cols, parts, (_o, g) => {
    for (let i = 0; i < parts.length; i++) {
      const p = parts[i]!;
      if (!p.requiresGrad) continue;
      const gp = p.ensureGrad();
      for (let j = 0; j < cols; j++) gp[j] += g[i * cols + j]!;
    }
  });
  for (let i = 0; i < parts.length; i++) {
    for (let j = 0; j < cols; j++) out.data[i * cols + j] = parts[i]!.data[j]!;
  }
  return out;
}

/** Select row i as a (1 x cols) view with scatter-add backward. */
export function row(a: Tensor, i: number): Tensor {
  const out = make(1, a.cols, [a], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += g[j]!;
    }
  });
  for (let j = 0; j < a.cols; j++) out.data[j] = a.data[i * a.cols + j]!;
  return out;
}

/** Mean over rows: (n x c) -> (1 x c). */
export function meanRows(a: Tensor): Tensor {
  const inv = 1.0 / Math.max(1, a.rows);
  const out = make(1, a.cols, [a], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += g[j]! * inv;
      }
    }
  });
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < a.cols; j++) out.data[j]! += a.data[i * a.cols + j]! * inv;
  }
  return out;
}

/** Sum of every entry: -> (1 x 1). */
export function sumAll(a: Tensor): Tensor {
  const out = make(1, 1, [a], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.size; i++) ga[i] += g[0]!;
    }
  });
  let s = 0;
  for (let i = 0; i < a.size; i++) s += a.data[i]!;
  out.data[0] = s;
  return out;
}

export function meanAll(a: Tensor): Tensor {
  return scale(sumAll(a), 1.0 / Math.max(1, a.size));
}

/** Row-wise dot products against a single (1 x c) vector: (n x c) -> (n x 1). */
export function dotRows(a: Tensor, v: Tensor): Tensor {
  if (v.rows !== 1 || v.cols !== a.cols) throw new Error('dotRows shape mismatch');
  const out = make(a.rows, 1, [a, v], (_o, g) => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += g[i]! * v.data[j]!;
      }
    }
    if (v.requiresGrad) {
      const gv = v.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) gv[j] += g[i]! * a.data[i * a.cols + j]!;
      }
    }
  });
  for (let i = 0; i < a.rows; i++) {
    let s = 0;
    for (let j = 0; j < a.cols; j++) s += a.data[i * a.cols + j]! * v.data[j]!;
    out.data[i] = s;
  }
  return out;
}

/**
 * Log-softmax over a (n x 1) logit column (numerically stable).
 * Returns (n x 1) log probabilities.
 */
export function logSoftmax(logits: Tensor): Tensor {
  if (logits.cols !== 1) throw new Error('logSoftmax expects an (n x 1) column');
  const n = logits.rows;
  let maxV = -Infinity;
  for (let i = 0; i < n; i++) maxV = Math.max(maxV, logits.data[i]!);
  let sumExp = 0;
  for (let i = 0; i < n; i++) sumExp += Math.exp(logits.data[i]! - maxV);
  const lse = maxV + Math.log(sumExp);
  const out = make(n, 1, [logits], (o, g) => {
    if (!logits.requiresGrad) return;
    const gl = logits.ensureGrad();
    let gSum = 0;
    for (let i = 0; i < n; i++) gSum += g[i]!;
    for (let i = 0; i < n; i++) gl[i] += g[i]! - Math.exp(o.data[i]!) * gSum;
  });
  for (let i = 0; i < n; i++) out.data[i] = logits.data[i]! - lse;
  return out;
}

/** min(a, b) elementwise; at ties the gradient follows a. */
export function minimum(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error('minimum shape mismatch');
  const out = make(a.rows, a.cols, [a, b], (_o, g) => {
    for (let i = 0; i < g.length; i++) {
      const useA = a.data[i]! <= b.data[i]!;
      if (useA && a.requiresGrad) a.ensureGrad()[i] += g[i]!;
      if (!useA && b.requiresGrad) b.ensureGrad()[i] += g[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = Math.min(a.data[i]!, b.data[i]!);
  return out;
}

/** clip(a, lo, hi) elementwise; zero gradient outside the interval. */
export function clip(a: Tensor, lo: number, hi: number): Tensor {
  const out = make(a.rows, a.cols, [a], (_o, g) => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    for (let i = 0; i < g.length; i++) {
      const v = a.data[i]!;
      if (v > lo && v < hi) ga[i] += g[i]!;
    }
  });
  for (let i = 0; i < out.size; i++) out.data[i] = Math.min(hi, Math.max(lo, a.data[i]!));
  return out;
}

/** Treat a as a constant: forwards values, blocks gradient flow. */
export function detach(a: Tensor): Tensor {
  return new Tensor(a.rows, a.cols, a.data.slice(), false);
}

export function constant(values: number[], rows?: number, cols?: number): Tensor {
  const r = rows ?? values.length;
  const c = cols ?? 1;
  const t = new Tensor(r, c);
  t.data.set(values);
  return t;
}

// ---------------------------------------------------------------------------
// backward pass

export function backward(loss: Tensor): void {
  if (loss.size !== 1) throw new Error('backward expects a scalar loss');
  const topo: Tensor[] = [];
  const seen = new Set<Tensor>();
  const visit = (t: Tensor) => {
    if (seen.has(t) || !t.requiresGrad) return;
    seen.add(t);
    for (const p of t.parents) visit(p);
    topo.push(t);
  };
  visit(loss);
  loss.ensureGrad()[0] = 1.0;
  for (let i = topo.length - 1; i >= 0; i--) {
    const t = topo[i]!;
    if (t.backwardFn && t.grad) t.backwardFn(t.grad);
  }
}

export function zeroGrads(params: Tensor[]): void {
  for (const p of params) {
    if (p.grad) p.grad.fill(0);
    else p.ensureGrad();
  }
}
