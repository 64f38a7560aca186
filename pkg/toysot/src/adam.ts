/** Adam optimizer with linear warmup and global-norm gradient clipping. */

import { Tensor } from "./tensor";

export interface AdamConfig {
  lr: number;
  beta1: number;
  beta2: number;
  eps: number;
  warmupSteps: number;
  clipNorm: number;
}

export const DEFAULT_ADAM: AdamConfig = {
  lr: 2e-3,
  beta1: 0.9,
  beta2: 0.98,
  eps: 1e-9,
  warmupSteps: 50,
  clipNorm: 1.0,
};

export class Adam {
  private readonly params: Tensor[];
  private readonly cfg: AdamConfig;
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;

  constructor(params: Tensor[], cfg: AdamConfig = DEFAULT_ADAM) {
    this.params = params;
    this.cfg = cfg;
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  /** Apply one update from the accumulated gradients, then zero them. */
  step(): void {
    this.t += 1;
    const { lr, beta1, beta2, eps, warmupSteps, clipNorm } = this.cfg;
    const warm = warmupSteps > 0 ? Math.min(1, this.t / warmupSteps) : 1;
    const rate = lr * warm;

    let normSq = 0;
    for (const p of this.params) {
      const g = p.grad;
      if (g === null) continue;
      for (let i = 0; i < g.length; i++) normSq += g[i] * g[i];
    }
    const norm = Math.sqrt(normSq);
    const clip = clipNorm > 0 && norm > clipNorm ? clipNorm / norm : 1;

    const bc1 = 1 - Math.pow(beta1, this.t);
    const bc2 = 1 - Math.pow(beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      const g = p.grad;
      if (g === null) continue;
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < g.length; i++) {
        const grad = g[i] * clip;
        m[i] = beta1 * m[i] + (1 - beta1) * grad;
        v[i] = beta2 * v[i] + (1 - beta2) * grad * grad;
        p.data[i] -= (rate * (m[i] / bc1)) / (Math.sqrt(v[i] / bc2) + eps);
      }
      g.fill(0);
    }
  }
}
