/**
 * Desk-scale attention-based encoder-decoder for serialized multi-talker
 * transcripts.
 *
 * Encoder: two strided convolutions (4x time subsampling) followed by
 * conformer blocks in which the convolution module carries three
 * departures from the stock design: layer normalization instead of batch
 * normalization, an extra pointwise convolution immediately after the
 * depthwise convolution's activation, and a squeeze-excitation module
 * (reduction 8) just before the module's dropout.
 *
 * Decoder: standard pre-norm transformer with causal self-attention and
 * cross-attention over the encoder output. Training minimizes mean
 * per-token negative log-likelihood of the serialized target, which
 * always terminates in the end-of-sequence token.
 */

import {
  Tensor,
  add,
  addBias,
  addConst,
  concatCols,
  crossEntropy,
  depthwiseConv,
  dropout,
  embed,
  gatherPatches,
  glu,
  layerNorm,
  matmul,
  meanRows,
  noGrad,
  rowScale,
  scale,
  sigmoid,
  sliceCols,
  sliceRows,
  softmaxRows,
  swish,
  transpose,
} from "./tensor";
import { makeRng } from "./util";
import { BOS_ID, EOS_ID } from "./vocab";

export interface ToyConfig {
  featDim: number;
  modelDim: number;
  heads: number;
  encoderLayers: number;
  decoderLayers: number;
  ffnDim: number;
  convKernel: number;
  seReduction: number;
  vocabSize: number;
  dropout: number;
  maxLen: number;
}

/**
 * Desk-scale defaults: 4 encoder layers at dim 64 with 4 heads, kernel 3,
 * squeeze-excitation reduction 8, 2 decoder layers, feedforward dim 256.
 * A production-scale system in this family runs far larger (on the order
 * of 18 encoder layers at dim 512 with 8 heads, kernel 31, and a
 * multi-thousand-subword vocabulary); these sizes are scaled down so the
 * whole model trains on a desktop CPU in minutes.
 */
export function defaultConfig(vocabSize: number): ToyConfig {
  return {
    featDim: 80,
    modelDim: 64,
    heads: 4,
    encoderLayers: 4,
    decoderLayers: 2,
    ffnDim: 256,
    convKernel: 3,
    seReduction: 8,
    vocabSize,
    dropout: 0.1,
    maxLen: 4096,
  };
}

export const MIN_INPUT_FRAMES = 4;

interface Linear {
  w: Tensor;
  b: Tensor;
}

interface LayerNormParams {
  gamma: Tensor;
  beta: Tensor;
}

interface AttentionParams {
  q: Linear;
  k: Linear;
  v: Linear;
  o: Linear;
}

interface FeedForward {
  norm: LayerNormParams;
  lift: Linear;
  drop: Linear;
}

interface ConvModule {
  norm: LayerNormParams;
  pointwiseIn: Linear;
  depthwiseW: Tensor;
  depthwiseB: Tensor;
  midNorm: LayerNormParams;
  pointwiseExtra: Linear;
  pointwiseOut: Linear;
  seSqueeze: Linear;
  seExcite: Linear;
}

interface ConformerBlock {
  ffn1: FeedForward;
  attnNorm: LayerNormParams;
  attn: AttentionParams;
  conv: ConvModule;
  ffn2: FeedForward;
  finalNorm: LayerNormParams;
}

interface DecoderLayer {
  selfNorm: LayerNormParams;
  selfAttn: AttentionParams;
  crossNorm: LayerNormParams;
  crossAttn: AttentionParams;
  ffn: FeedForward;
}

export interface TrainingExample {
  features: Tensor;
  target: Int32Array;
}

/** Sinusoidal positional table, [maxLen, dim] row-major. */
function positionalTable(maxLen: number, dim: number): Float64Array {
  const table = new Float64Array(maxLen * dim);
  for (let t = 0; t < maxLen; t++) {
    for (let j = 0; j < dim; j++) {
      const rate = Math.pow(10000, -Math.floor(j / 2) * 2 / dim);
      table[t * dim + j] = j % 2 === 0 ? Math.sin(t * rate) : Math.cos(t * rate);
    }
  }
  return table;
}

export class ToySotModel {
  readonly cfg: ToyConfig;
  readonly params: Tensor[] = [];
  readonly paramNames: string[] = [];

  private readonly subsample1: Linear;
  private readonly subsample2: Linear;
  private readonly encoderBlocks: ConformerBlock[] = [];
  private readonly embedding: Tensor;
  private readonly decoderLayers: DecoderLayer[] = [];
  private readonly decoderNorm: LayerNormParams;
  private readonly output: Linear;
  private readonly posTable: Float64Array;
  private readonly causalMasks = new Map<number, Float64Array>();
  private trainRng: (() => number) | null = null;

  constructor(cfg: ToyConfig, seed = 1) {
    if (cfg.modelDim % cfg.heads !== 0) {
      throw new Error(
        `model dim ${cfg.modelDim} not divisible by ${cfg.heads} heads`,
      );
    }
    if (cfg.vocabSize <= Math.max(BOS_ID, EOS_ID)) {
      throw new Error(`vocab size ${cfg.vocabSize} too small for special tokens`);
    }
    this.cfg = cfg;
    const d = cfg.modelDim;

    const weight = (name: string, rows: number, cols: number): Tensor => {
      const limit = Math.sqrt(6 / (rows + cols));
      const t = new Tensor(rows, cols);
      // Glorot-uniform via the gaussian source folded into [-limit, limit).
      const uniform = makeRng((seed ^ (this.params.length * 2654435761)) >>> 0);
      for (let i = 0; i < t.size; i++) {
        t.data[i] = (uniform() * 2 - 1) * limit;
      }
      this.registerParam(name, t);
      return t;
    };
    const zeros = (name: string, rows: number, cols: number): Tensor => {
      const t = new Tensor(rows, cols);
      this.registerParam(name, t);
      return t;
    };
    const ones = (name: string, cols: number): Tensor => {
      const t = new Tensor(1, cols);
      t.data.fill(1);
      this.registerParam(name, t);
      return t;
    };
    const linear = (name: string, rows: number, cols: number): Linear => ({
      w: weight(`${name}.w`, rows, cols),
      b: zeros(`${name}.b`, 1, cols),
    });
    const norm = (name: string): LayerNormParams => ({
      gamma: ones(`${name}.gamma`, d),
      beta: zeros(`${name}.beta`, 1, d),
    });
    const attention = (name: string): AttentionParams => ({
      q: linear(`${name}.q`, d, d),
      k: linear(`${name}.k`, d, d),
      v: linear(`${name}.v`, d, d),
      o: linear(`${name}.o`, d, d),
    });
    const feedForward = (name: string): FeedForward => ({
      norm: norm(`${name}.norm`),
      lift: linear(`${name}.lift`, d, cfg.ffnDim),
      drop: linear(`${name}.drop`, cfg.ffnDim, d),
    });

    this.subsample1 = linear("subsample1", cfg.convKernel * cfg.featDim, d);
    this.subsample2 = linear("subsample2", cfg.convKernel * d, d);

    const seHidden = Math.max(1, Math.floor(d / cfg.seReduction));
    for (let l = 0; l < cfg.encoderLayers; l++) {
      const p = `enc${l}`;
      this.encoderBlocks.push({
        ffn1: feedForward(`${p}.ffn1`),
        attnNorm: norm(`${p}.attnNorm`),
        attn: attention(`${p}.attn`),
        conv: {
          norm: norm(`${p}.conv.norm`),
          pointwiseIn: linear(`${p}.conv.in`, d, 2 * d),
          depthwiseW: weight(`${p}.conv.dw.w`, cfg.convKernel, d),
          depthwiseB: zeros(`${p}.conv.dw.b`, 1, d),
          midNorm: norm(`${p}.conv.midNorm`),
          pointwiseExtra: linear(`${p}.conv.extra`, d, d),
          pointwiseOut: linear(`${p}.conv.out`, d, d),
          seSqueeze: linear(`${p}.conv.se.squeeze`, d, seHidden),
          seExcite: linear(`${p}.conv.se.excite`, seHidden, d),
        },
        ffn2: feedForward(`${p}.ffn2`),
        finalNorm: norm(`${p}.finalNorm`),
      });
    }

    this.embedding = weight("embedding", cfg.vocabSize, d);
    for (let l = 0; l < cfg.decoderLayers; l++) {
      const p = `dec${l}`;
      this.decoderLayers.push({
        selfNorm: norm(`${p}.selfNorm`),
        selfAttn: attention(`${p}.selfAttn`),
        crossNorm: norm(`${p}.crossNorm`),
        crossAttn: attention(`${p}.crossAttn`),
        ffn: feedForward(`${p}.ffn`),
      });
    }
    this.decoderNorm = norm("decoderNorm");
    this.output = linear("output", d, cfg.vocabSize);
    this.posTable = positionalTable(cfg.maxLen, d);
  }

  private registerParam(name: string, t: Tensor): void {
    this.params.push(t);
    this.paramNames.push(name);
    t.ensureGrad();
  }

  numParams(): number {
    let n = 0;
    for (const p of this.params) n += p.size;
    return n;
  }

  /** Enable dropout with the given RNG; null switches to inference mode. */
  setTraining(rng: (() => number) | null): void {
    this.trainRng = rng;
  }

  private dropoutMaybe(x: Tensor): Tensor {
    return dropout(x, this.trainRng === null ? 0 : this.cfg.dropout, this.trainRng);
  }

  private positional(rows: number): Float64Array {
    const d = this.cfg.modelDim;
    if (rows > this.cfg.maxLen) {
      throw new Error(`sequence of ${rows} exceeds positional table ${this.cfg.maxLen}`);
    }
    return this.posTable.subarray(0, rows * d);
  }

  private causalMask(rows: number): Float64Array {
    let mask = this.causalMasks.get(rows);
    if (mask === undefined) {
      mask = new Float64Array(rows * rows);
      for (let i = 0; i < rows; i++) {
        for (let j = i + 1; j < rows; j++) {
          mask[i * rows + j] = -1e9;
        }
      }
      this.causalMasks.set(rows, mask);
    }
    return mask;
  }

  private attend(
    p: AttentionParams,
    queries: Tensor,
    keysValues: Tensor,
    mask: Float64Array | null,
  ): Tensor {
    const heads = this.cfg.heads;
    const dh = this.cfg.modelDim / heads;
    const q = addBias(matmul(queries, p.q.w), p.q.b);
    const k = addBias(matmul(keysValues, p.k.w), p.k.b);
    const v = addBias(matmul(keysValues, p.v.w), p.v.b);
    const contexts: Tensor[] = [];
    for (let h = 0; h < heads; h++) {
      const qh = sliceCols(q, h * dh, dh);
      const kh = sliceCols(k, h * dh, dh);
      const vh = sliceCols(v, h * dh, dh);
      let scores = scale(matmul(qh, transpose(kh)), 1 / Math.sqrt(dh));
      if (mask !== null) {
        scores = addConst(scores, mask);
      }
      contexts.push(matmul(softmaxRows(scores), vh));
    }
    const ctx = concatCols(contexts);
    return this.dropoutMaybe(addBias(matmul(ctx, p.o.w), p.o.b));
  }

  private feedForward(p: FeedForward, x: Tensor): Tensor {
    const h = swish(addBias(matmul(layerNorm(x, p.norm.gamma, p.norm.beta), p.lift.w), p.lift.b));
    return this.dropoutMaybe(addBias(matmul(this.dropoutMaybe(h), p.drop.w), p.drop.b));
  }

  /**
   * Conformer convolution module. Layer normalization stands in where a
   * batch statistic would be (the module must work one utterance at a
   * time), one extra pointwise convolution follows the depthwise
   * convolution's activation, and squeeze-excitation (time-pooled, since
   * time is the only pooled axis available) runs last, just before the
   * module's dropout.
   */
  private convModule(p: ConvModule, x: Tensor): Tensor {
    let h = layerNorm(x, p.norm.gamma, p.norm.beta);
    h = glu(addBias(matmul(h, p.pointwiseIn.w), p.pointwiseIn.b));
    h = depthwiseConv(h, p.depthwiseW, p.depthwiseB);
    h = swish(layerNorm(h, p.midNorm.gamma, p.midNorm.beta));
    h = addBias(matmul(h, p.pointwiseExtra.w), p.pointwiseExtra.b);
    h = addBias(matmul(h, p.pointwiseOut.w), p.pointwiseOut.b);
    const pooled = meanRows(h);
    const gate = sigmoid(
      addBias(
        matmul(
          swish(addBias(matmul(pooled, p.seSqueeze.w), p.seSqueeze.b)),
          p.seExcite.w,
        ),
        p.seExcite.b,
      ),
    );
    return this.dropoutMaybe(rowScale(h, gate));
  }

  private conformerBlock(b: ConformerBlock, x: Tensor): Tensor {
    let h = add(x, scale(this.feedForward(b.ffn1, x), 0.5));
    const normed = layerNorm(h, b.attnNorm.gamma, b.attnNorm.beta);
    h = add(h, this.attend(b.attn, normed, normed, null));
    h = add(h, this.convModule(b.conv, h));
    h = add(h, scale(this.feedForward(b.ffn2, h), 0.5));
    return layerNorm(h, b.finalNorm.gamma, b.finalNorm.beta);
  }

  /**
   * Encode [frames, featDim] features into [floor(frames/4), modelDim].
   * Requires at least MIN_INPUT_FRAMES finite-valued frames.
   */
  encode(features: Tensor): Tensor {
    if (features.cols !== this.cfg.featDim) {
      throw new Error(
        `feature dim ${features.cols} does not match configured ${this.cfg.featDim}`,
      );
    }
    if (features.rows < MIN_INPUT_FRAMES) {
      throw new Error(
        `need at least ${MIN_INPUT_FRAMES} frames for one subsampled output, got ${features.rows}`,
      );
    }
    for (let i = 0; i < features.size; i++) {
      if (!Number.isFinite(features.data[i])) {
        throw new Error("features contain non-finite values");
      }
    }
    const k = this.cfg.convKernel;
    let h = swish(
      addBias(matmul(gatherPatches(features, k, 2, 1), this.subsample1.w), this.subsample1.b),
    );
    h = swish(
      addBias(matmul(gatherPatches(h, k, 2, 1), this.subsample2.w), this.subsample2.b),
    );
    h = this.dropoutMaybe(addConst(h, this.positional(h.rows)));
    for (const block of this.encoderBlocks) {
      h = this.conformerBlock(block, h);
    }
    return h;
  }

  /** Decoder logits [inputIds.length, vocabSize] given encoder output. */
  decoderLogits(encoded: Tensor, inputIds: Int32Array): Tensor {
    let y = embed(inputIds, this.embedding);
    y = this.dropoutMaybe(
      addConst(scale(y, Math.sqrt(this.cfg.modelDim)), this.positional(y.rows)),
    );
    const mask = this.causalMask(y.rows);
    for (const layer of this.decoderLayers) {
      const selfNormed = layerNorm(y, layer.selfNorm.gamma, layer.selfNorm.beta);
      y = add(y, this.attend(layer.selfAttn, selfNormed, selfNormed, mask));
      const crossNormed = layerNorm(y, layer.crossNorm.gamma, layer.crossNorm.beta);
      y = add(y, this.attend(layer.crossAttn, crossNormed, encoded, null));
      y = add(y, this.feedForward(layer.ffn, y));
    }
    y = layerNorm(y, this.decoderNorm.gamma, this.decoderNorm.beta);
    return addBias(matmul(y, this.output.w), this.output.b);
  }

  /**
   * Probability distribution over the vocabulary for the next token after
   * the given prefix (begin-of-sequence handling is internal). Entries
   * are non-negative and sum to 1; unknown token ids raise.
   */
  decodeStep(prefix: ArrayLike<number>, encoded: Tensor): Float64Array {
    const V = this.cfg.vocabSize;
    for (let i = 0; i < prefix.length; i++) {
      const id = prefix[i];
      if (!Number.isInteger(id) || id < 0 || id >= V) {
        throw new Error(`token id ${id} outside vocabulary of ${V}`);
      }
    }
    return noGrad(() => {
      const ids = new Int32Array(prefix.length + 1);
      ids[0] = BOS_ID;
      for (let i = 0; i < prefix.length; i++) ids[i + 1] = prefix[i];
      const logits = this.decoderLogits(encoded, ids);
      const last = sliceRows(logits, logits.rows - 1, 1);
      return softmaxRows(last).data.slice();
    });
  }

  /**
   * Mean negative log-likelihood per target token over the batch.
   * Every target must terminate with the end-of-sequence id.
   */
  sotLoss(batch: TrainingExample[]): Tensor {
    if (batch.length === 0) {
      throw new Error("sotLoss needs a non-empty batch");
    }
    let totalTokens = 0;
    let summed: Tensor | null = null;
    for (const example of batch) {
      const target = example.target;
      if (target.length === 0 || target[target.length - 1] !== EOS_ID) {
        throw new Error("target sequence must end with the end-of-sequence id");
      }
      const inputs = new Int32Array(target.length);
      inputs[0] = BOS_ID;
      inputs.set(target.subarray(0, target.length - 1), 1);
      const logits = this.decoderLogits(this.encode(example.features), inputs);
      const seqLoss = scale(crossEntropy(logits, target), target.length);
      summed = summed === null ? seqLoss : add(summed, seqLoss);
      totalTokens += target.length;
    }
    return scale(summed as Tensor, 1 / totalTokens);
  }

  /**
   * Greedy decoding: repeatedly take the arg-max token until the
   * end-of-sequence id appears or the cap is reached. The returned ids
   * include the terminating end-of-sequence token when one was emitted.
   */
  greedyDecode(features: Tensor, maxTokens = 400): Int32Array {
    return noGrad(() => {
      const encoded = this.encode(features);
      const out: number[] = [];
      for (let step = 0; step < maxTokens; step++) {
        const probs = this.decodeStep(out, encoded);
        let best = 0;
        for (let j = 1; j < probs.length; j++) {
          if (probs[j] > probs[best]) best = j;
        }
        out.push(best);
        if (best === EOS_ID) break;
      }
      return Int32Array.from(out);
    });
  }
}
