/**
 * Minimal reverse-mode autodiff on dense 2-D double tensors.
 *
 * Every tensor is rows x cols (sequences are [time, dim], vectors [1, dim]).
 * Operations record closures on a global tape; backward() replays it in
 * reverse. Double precision throughout so finite-difference gradient
 * checks are meaningful.
 */

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  readonly data: Float64Array;
  grad: Float64Array | null = null;

  constructor(rows: number, cols: number, data?: Float64Array) {
    if (rows < 1 || cols < 1) {
      throw new Error(`invalid tensor shape ${rows}x${cols}`);
    }
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(
        `data length ${this.data.length} does not match shape ${rows}x${cols}`,
      );
    }
  }

  get size(): number {
    return this.rows * this.cols;
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) {
      this.grad = new Float64Array(this.size);
    }
    return this.grad;
  }
}

export function tensorFrom(rows: number, cols: number, values: number[]): Tensor {
  return new Tensor(rows, cols, Float64Array.from(values));
}

type BackFn = () => void;

let tape: BackFn[] = [];
let recording = true;

function record(back: BackFn): void {
  if (recording) {
    tape.push(back);
  }
}

/** Drop all recorded operations (start of a fresh training step). */
export function resetTape(): void {
  tape = [];
}

/** Run fn without recording gradients (inference). */
export function noGrad<T>(fn: () => T): T {
  const prev = recording;
  recording = false;
  try {
    return fn();
  } finally {
    recording = prev;
  }
}

/** Reverse the tape, seeding d(loss)/d(loss) = 1. Loss must be 1x1. */
export function backward(loss: Tensor): void {
  if (loss.size !== 1) {
    throw new Error("backward expects a scalar loss tensor");
  }
  loss.ensureGrad()[0] = 1.0;
  for (let i = tape.length - 1; i >= 0; i--) {
    tape[i]();
  }
  tape = [];
}

// ---------------------------------------------------------------------------
// Elementwise and linear algebra
// ---------------------------------------------------------------------------

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) {
    throw new Error(`matmul shape mismatch ${a.rows}x${a.cols} * ${b.rows}x${b.cols}`);
  }
  const m = a.rows;
  const k = a.cols;
  const n = b.cols;
  const out = new Tensor(m, n);
  const ad = a.data;
  const bd = b.data;
  const od = out.data;
  for (let i = 0; i < m; i++) {
    const aRow = i * k;
    const oRow = i * n;
    for (let p = 0; p < k; p++) {
      const av = ad[aRow + p];
      if (av === 0) continue;
      const bRow = p * n;
      for (let j = 0; j < n; j++) {
        od[oRow + j] += av * bd[bRow + j];
      }
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const ag = a.ensureGrad();
    const bg = b.ensureGrad();
    for (let i = 0; i < m; i++) {
      const aRow = i * k;
      const oRow = i * n;
      for (let p = 0; p < k; p++) {
        const bRow = p * n;
        let accA = 0;
        const av = ad[aRow + p];
        for (let j = 0; j < n; j++) {
          const g = og[oRow + j];
          accA += g * bd[bRow + j];
          bg[bRow + j] += g * av;
        }
        ag[aRow + p] += accA;
      }
    }
  });
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new Error("add shape mismatch");
  }
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) {
    out.data[i] = a.data[i] + b.data[i];
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const ag = a.ensureGrad();
    const bg = b.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      ag[i] += og[i];
      bg[i] += og[i];
    }
  });
  return out;
}

/** Add a [1, d] bias row to every row of x. */
export function addBias(x: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== x.cols) {
    throw new Error("addBias shape mismatch");
  }
  const out = new Tensor(x.rows, x.cols);
  const d = x.cols;
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < d; j++) {
      out.data[i * d + j] = x.data[i * d + j] + bias.data[j];
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    const bg = bias.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < d; j++) {
        const g = og[i * d + j];
        xg[i * d + j] += g;
        bg[j] += g;
      }
    }
  });
  return out;
}

/** Add a constant (non-learned) array elementwise, e.g. positional code or mask. */
export function addConst(x: Tensor, constant: Float64Array): Tensor {
  if (constant.length !== x.size) {
    throw new Error("addConst length mismatch");
  }
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) {
    out.data[i] = x.data[i] + constant[i];
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      xg[i] += og[i];
    }
  });
  return out;
}

export function mul(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new Error("mul shape mismatch");
  }
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) {
    out.data[i] = a.data[i] * b.data[i];
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const ag = a.ensureGrad();
    const bg = b.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      ag[i] += og[i] * b.data[i];
      bg[i] += og[i] * a.data[i];
    }
  });
  return out;
}

export function scale(x: Tensor, s: number): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) {
    out.data[i] = x.data[i] * s;
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      xg[i] += og[i] * s;
    }
  });
  return out;
}

export function sigmoid(x: Tensor): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) {
    out.data[i] = 1 / (1 + Math.exp(-x.data[i]));
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      const s = out.data[i];
      xg[i] += og[i] * s * (1 - s);
    }
  });
  return out;
}

/** swish(x) = x * sigmoid(x) */
export function swish(x: Tensor): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) {
    const v = x.data[i];
    out.data[i] = v / (1 + Math.exp(-v));
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      const v = x.data[i];
      const s = 1 / (1 + Math.exp(-v));
      xg[i] += og[i] * (s + v * s * (1 - s));
    }
  });
  return out;
}

/** Gated linear unit over the channel axis: [T, 2d] -> [T, d]. */
export function glu(x: Tensor): Tensor {
  if (x.cols % 2 !== 0) {
    throw new Error("glu needs an even channel count");
  }
  const d = x.cols / 2;
  const out = new Tensor(x.rows, d);
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < d; j++) {
      const a = x.data[i * x.cols + j];
      const b = x.data[i * x.cols + d + j];
      out.data[i * d + j] = a / (1 + Math.exp(-b));
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < d; j++) {
        const a = x.data[i * x.cols + j];
        const b = x.data[i * x.cols + d + j];
        const s = 1 / (1 + Math.exp(-b));
        const g = og[i * d + j];
        xg[i * x.cols + j] += g * s;
        xg[i * x.cols + d + j] += g * a * s * (1 - s);
      }
    }
  });
  return out;
}

/** Per-row layer normalization with learned gain and bias. */
export function layerNorm(x: Tensor, gamma: Tensor, beta: Tensor, eps = 1e-5): Tensor {
  const d = x.cols;
  if (gamma.cols !== d || beta.cols !== d) {
    throw new Error("layerNorm parameter shape mismatch");
  }
  const out = new Tensor(x.rows, d);
  const means = new Float64Array(x.rows);
  const invStd = new Float64Array(x.rows);
  for (let i = 0; i < x.rows; i++) {
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x.data[i * d + j];
    mean /= d;
    let varSum = 0;
    for (let j = 0; j < d; j++) {
      const c = x.data[i * d + j] - mean;
      varSum += c * c;
    }
    const inv = 1 / Math.sqrt(varSum / d + eps);
    means[i] = mean;
    invStd[i] = inv;
    for (let j = 0; j < d; j++) {
      const norm = (x.data[i * d + j] - mean) * inv;
      out.data[i * d + j] = norm * gamma.data[j] + beta.data[j];
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    const gg = gamma.ensureGrad();
    const bg = beta.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      const inv = invStd[i];
      const mean = means[i];
      let sumG = 0;
      let sumGN = 0;
      for (let j = 0; j < d; j++) {
        const norm = (x.data[i * d + j] - mean) * inv;
        const gOut = og[i * d + j];
        gg[j] += gOut * norm;
        bg[j] += gOut;
        const gNorm = gOut * gamma.data[j];
        sumG += gNorm;
        sumGN += gNorm * norm;
      }
      for (let j = 0; j < d; j++) {
        const norm = (x.data[i * d + j] - mean) * inv;
        const gNorm = og[i * d + j] * gamma.data[j];
        xg[i * d + j] += inv * (gNorm - sumG / d - (norm * sumGN) / d);
      }
    }
  });
  return out;
}

/** Row-wise softmax (used for attention weights). */
export function softmaxRows(x: Tensor): Tensor {
  const out = new Tensor(x.rows, x.cols);
  const n = x.cols;
  for (let i = 0; i < x.rows; i++) {
    let max = -Infinity;
    for (let j = 0; j < n; j++) max = Math.max(max, x.data[i * n + j]);
    let sum = 0;
    for (let j = 0; j < n; j++) {
      const e = Math.exp(x.data[i * n + j] - max);
      out.data[i * n + j] = e;
      sum += e;
    }
    for (let j = 0; j < n; j++) out.data[i * n + j] /= sum;
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      let dot = 0;
      for (let j = 0; j < n; j++) {
        dot += og[i * n + j] * out.data[i * n + j];
      }
      for (let j = 0; j < n; j++) {
        const p = out.data[i * n + j];
        xg[i * n + j] += p * (og[i * n + j] - dot);
      }
    }
  });
  return out;
}

export function transpose(x: Tensor): Tensor {
  const out = new Tensor(x.cols, x.rows);
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < x.cols; j++) {
      out.data[j * x.rows + i] = x.data[i * x.cols + j];
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < x.cols; j++) {
        xg[i * x.cols + j] += og[j * x.rows + i];
      }
    }
  });
  return out;
}

/** Copy a contiguous block of rows; gradients flow back to those rows. */
export function sliceRows(x: Tensor, start: number, count: number): Tensor {
  if (start < 0 || start + count > x.rows) {
    throw new Error("sliceRows out of range");
  }
  const d = x.cols;
  const out = new Tensor(count, d);
  out.data.set(x.data.subarray(start * d, (start + count) * d));
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < count * d; i++) {
      xg[start * d + i] += og[i];
    }
  });
  return out;
}

/** Copy a contiguous block of columns from every row. */
export function sliceCols(x: Tensor, start: number, count: number): Tensor {
  if (start < 0 || start + count > x.cols) {
    throw new Error("sliceCols out of range");
  }
  const out = new Tensor(x.rows, count);
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < count; j++) {
      out.data[i * count + j] = x.data[i * x.cols + start + j];
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < count; j++) {
        xg[i * x.cols + start + j] += og[i * count + j];
      }
    }
  });
  return out;
}

/** Concatenate tensors with equal row counts along the column axis. */
export function concatCols(parts: Tensor[]): Tensor {
  if (parts.length === 0) {
    throw new Error("concatCols needs at least one tensor");
  }
  const rows = parts[0].rows;
  let cols = 0;
  for (const p of parts) {
    if (p.rows !== rows) {
      throw new Error("concatCols row count mismatch");
    }
    cols += p.cols;
  }
  const out = new Tensor(rows, cols);
  let off = 0;
  for (const p of parts) {
    for (let i = 0; i < rows; i++) {
      for (let j = 0; j < p.cols; j++) {
        out.data[i * cols + off + j] = p.data[i * p.cols + j];
      }
    }
    off += p.cols;
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    let offset = 0;
    for (const p of parts) {
      const pg = p.ensureGrad();
      for (let i = 0; i < rows; i++) {
        for (let j = 0; j < p.cols; j++) {
          pg[i * p.cols + j] += og[i * cols + offset + j];
        }
      }
      offset += p.cols;
    }
  });
  return out;
}

/** Mean over rows: [T, d] -> [1, d] (squeeze step of squeeze-excitation). */
export function meanRows(x: Tensor): Tensor {
  const d = x.cols;
  const out = new Tensor(1, d);
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < d; j++) {
      out.data[j] += x.data[i * d + j];
    }
  }
  for (let j = 0; j < d; j++) out.data[j] /= x.rows;
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    const inv = 1 / x.rows;
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < d; j++) {
        xg[i * d + j] += og[j] * inv;
      }
    }
  });
  return out;
}

/** Multiply every row of x by a [1, d] scale vector (excite step). */
export function rowScale(x: Tensor, s: Tensor): Tensor {
  if (s.rows !== 1 || s.cols !== x.cols) {
    throw new Error("rowScale shape mismatch");
  }
  const d = x.cols;
  const out = new Tensor(x.rows, d);
  for (let i = 0; i < x.rows; i++) {
    for (let j = 0; j < d; j++) {
      out.data[i * d + j] = x.data[i * d + j] * s.data[j];
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    const sg = s.ensureGrad();
    for (let i = 0; i < x.rows; i++) {
      for (let j = 0; j < d; j++) {
        const g = og[i * d + j];
        xg[i * d + j] += g * s.data[j];
        sg[j] += g * x.data[i * d + j];
      }
    }
  });
  return out;
}

/**
 * Extract strided convolution patches: output row t' is the concatenation
 * of kernelSize input rows starting at t' * stride - padLeft (zeros
 * outside the input). Convolution is then a plain matmul with a
 * [kernelSize * cin, cout] weight.
 */
export function gatherPatches(
  x: Tensor,
  kernelSize: number,
  stride: number,
  padLeft: number,
): Tensor {
  const cin = x.cols;
  const outRows = Math.floor((x.rows + padLeft - kernelSize) / stride) + 1;
  if (outRows < 1) {
    throw new Error(
      `input of ${x.rows} rows too short for kernel ${kernelSize} stride ${stride}`,
    );
  }
  const out = new Tensor(outRows, kernelSize * cin);
  for (let t = 0; t < outRows; t++) {
    const base = t * stride - padLeft;
    for (let tap = 0; tap < kernelSize; tap++) {
      const src = base + tap;
      if (src < 0 || src >= x.rows) continue;
      for (let c = 0; c < cin; c++) {
        out.data[t * kernelSize * cin + tap * cin + c] = x.data[src * cin + c];
      }
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let t = 0; t < outRows; t++) {
      const base = t * stride - padLeft;
      for (let tap = 0; tap < kernelSize; tap++) {
        const src = base + tap;
        if (src < 0 || src >= x.rows) continue;
        for (let c = 0; c < cin; c++) {
          xg[src * cin + c] += og[t * kernelSize * cin + tap * cin + c];
        }
      }
    }
  });
  return out;
}

/** Depthwise temporal convolution, stride 1, zero-padded to keep length. */
export function depthwiseConv(x: Tensor, w: Tensor, bias: Tensor): Tensor {
  const k = w.rows;
  const c = x.cols;
  if (w.cols !== c || bias.cols !== c || bias.rows !== 1) {
    throw new Error("depthwiseConv shape mismatch");
  }
  const padLeft = Math.floor((k - 1) / 2);
  const out = new Tensor(x.rows, c);
  for (let t = 0; t < x.rows; t++) {
    for (let j = 0; j < c; j++) {
      let acc = bias.data[j];
      for (let tap = 0; tap < k; tap++) {
        const src = t - padLeft + tap;
        if (src < 0 || src >= x.rows) continue;
        acc += x.data[src * c + j] * w.data[tap * c + j];
      }
      out.data[t * c + j] = acc;
    }
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    const wg = w.ensureGrad();
    const bg = bias.ensureGrad();
    for (let t = 0; t < x.rows; t++) {
      for (let j = 0; j < c; j++) {
        const g = og[t * c + j];
        bg[j] += g;
        for (let tap = 0; tap < k; tap++) {
          const src = t - padLeft + tap;
          if (src < 0 || src >= x.rows) continue;
          xg[src * c + j] += g * w.data[tap * c + j];
          wg[tap * c + j] += g * x.data[src * c + j];
        }
      }
    }
  });
  return out;
}

/** Look up embedding rows for a token id sequence. */
export function embed(ids: Int32Array, table: Tensor): Tensor {
  const d = table.cols;
  const out = new Tensor(ids.length, d);
  for (let i = 0; i < ids.length; i++) {
    const id = ids[i];
    if (id < 0 || id >= table.rows) {
      throw new Error(`token id ${id} outside vocabulary of ${table.rows}`);
    }
    out.data.set(table.data.subarray(id * d, (id + 1) * d), i * d);
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const tg = table.ensureGrad();
    for (let i = 0; i < ids.length; i++) {
      const id = ids[i];
      for (let j = 0; j < d; j++) {
        tg[id * d + j] += og[i * d + j];
      }
    }
  });
  return out;
}

/**
 * Mean token-level cross entropy of logits [L, V] against target ids [L],
 * with the softmax fused for numerical stability.
 */
export function crossEntropy(logits: Tensor, targets: Int32Array): Tensor {
  const L = logits.rows;
  const V = logits.cols;
  if (targets.length !== L) {
    throw new Error("crossEntropy target length mismatch");
  }
  const probs = new Float64Array(L * V);
  let nll = 0;
  for (let i = 0; i < L; i++) {
    const t = targets[i];
    if (t < 0 || t >= V) {
      throw new Error(`target id ${t} outside vocabulary of ${V}`);
    }
    let max = -Infinity;
    for (let j = 0; j < V; j++) max = Math.max(max, logits.data[i * V + j]);
    let sum = 0;
    for (let j = 0; j < V; j++) {
      const e = Math.exp(logits.data[i * V + j] - max);
      probs[i * V + j] = e;
      sum += e;
    }
    for (let j = 0; j < V; j++) probs[i * V + j] /= sum;
    nll -= Math.log(probs[i * V + t]);
  }
  const out = new Tensor(1, 1, Float64Array.of(nll / L));
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const lg = logits.ensureGrad();
    const g = og[0] / L;
    for (let i = 0; i < L; i++) {
      for (let j = 0; j < V; j++) {
        lg[i * V + j] += g * (probs[i * V + j] - (j === targets[i] ? 1 : 0));
      }
    }
  });
  return out;
}

/** Inverted dropout; identity when p = 0 or a null RNG is given. */
export function dropout(x: Tensor, p: number, uniform: (() => number) | null): Tensor {
  if (p === 0 || uniform === null) {
    return x;
  }
  if (p < 0 || p >= 1) {
    throw new Error(`dropout probability ${p} outside [0, 1)`);
  }
  const keep = 1 - p;
  const mask = new Float64Array(x.size);
  for (let i = 0; i < x.size; i++) {
    mask[i] = uniform() < p ? 0 : 1 / keep;
  }
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) {
    out.data[i] = x.data[i] * mask[i];
  }
  record(() => {
    const og = out.grad;
    if (og === null) return;
    const xg = x.ensureGrad();
    for (let i = 0; i < og.length; i++) {
      xg[i] += og[i] * mask[i];
    }
  });
  return out;
}
