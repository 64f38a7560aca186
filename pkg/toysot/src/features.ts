/**
 * Log-mel filterbank features for 16 kHz mono audio.
 *
 * 25 ms Hann windows with a 10 ms hop, 512-point FFT, 80 triangular mel
 * bands, natural log, then per-utterance mean normalization. Output is
 * [numFrames, numMels] row-major.
 */

export interface FeatureConfig {
  sampleRate: number;
  windowMs: number;
  hopMs: number;
  fftSize: number;
  numMels: number;
}

export const DEFAULT_FEATURES: FeatureConfig = {
  sampleRate: 16000,
  windowMs: 25,
  hopMs: 10,
  fftSize: 512,
  numMels: 80,
};

function hannWindow(n: number): Float64Array {
  const w = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    w[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / n);
  }
  return w;
}

/** In-place iterative radix-2 FFT over interleaved (re, im) pairs. */
function fftRadix2(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) {
    throw new Error(`FFT size ${n} is not a power of two`);
  }
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      const tr = re[i];
      re[i] = re[j];
      re[j] = tr;
      const ti = im[i];
      im[i] = im[j];
      im[j] = ti;
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wr = Math.cos(ang);
    const wi = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let cr = 1;
      let ci = 0;
      for (let j = 0; j < len / 2; j++) {
        const ar = re[i + j];
        const ai = im[i + j];
        const br = re[i + j + len / 2] * cr - im[i + j + len / 2] * ci;
        const bi = re[i + j + len / 2] * ci + im[i + j + len / 2] * cr;
        re[i + j] = ar + br;
        im[i + j] = ai + bi;
        re[i + j + len / 2] = ar - br;
        im[i + j + len / 2] = ai - bi;
        const ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

function hzToMel(hz: number): number {
  return 2595 * Math.log10(1 + hz / 700);
}

function melToHz(mel: number): number {
  return 700 * (Math.pow(10, mel / 2595) - 1);
}

/** Triangular filterbank, [numMels, fftSize/2 + 1]. */
function melFilterbank(cfg: FeatureConfig): Float64Array {
  const bins = cfg.fftSize / 2 + 1;
  const melLow = hzToMel(0);
  const melHigh = hzToMel(cfg.sampleRate / 2);
  const centers = new Float64Array(cfg.numMels + 2);
  for (let i = 0; i < centers.length; i++) {
    const mel = melLow + ((melHigh - melLow) * i) / (cfg.numMels + 1);
    centers[i] = (melToHz(mel) * cfg.fftSize) / cfg.sampleRate;
  }
  const fb = new Float64Array(cfg.numMels * bins);
  for (let m = 0; m < cfg.numMels; m++) {
    const left = centers[m];
    const mid = centers[m + 1];
    const right = centers[m + 2];
    for (let b = 0; b < bins; b++) {
      if (b > left && b < mid) {
        fb[m * bins + b] = (b - left) / (mid - left);
      } else if (b >= mid && b < right) {
        fb[m * bins + b] = (right - b) / (right - mid);
      }
    }
  }
  return fb;
}

/**
 * Compute mean-normalized log-mel features. Returns the flat row-major
 * array plus the frame count; signals shorter than one window are
 * zero-padded to a single frame.
 */
export function logMel(
  samples: Float64Array,
  cfg: FeatureConfig = DEFAULT_FEATURES,
): { frames: number; dim: number; data: Float64Array } {
  const win = Math.round((cfg.windowMs / 1000) * cfg.sampleRate);
  const hop = Math.round((cfg.hopMs / 1000) * cfg.sampleRate);
  if (win > cfg.fftSize) {
    throw new Error(`window of ${win} samples exceeds FFT size ${cfg.fftSize}`);
  }
  const frames = Math.max(1, 1 + Math.floor((samples.length - win) / hop));
  const bins = cfg.fftSize / 2 + 1;
  const window = hannWindow(win);
  const fb = melFilterbank(cfg);
  const out = new Float64Array(frames * cfg.numMels);
  const re = new Float64Array(cfg.fftSize);
  const im = new Float64Array(cfg.fftSize);
  const power = new Float64Array(bins);
  for (let f = 0; f < frames; f++) {
    re.fill(0);
    im.fill(0);
    const start = f * hop;
    for (let i = 0; i < win; i++) {
      const s = start + i < samples.length ? samples[start + i] : 0;
      re[i] = s * window[i];
    }
    fftRadix2(re, im);
    for (let b = 0; b < bins; b++) {
      power[b] = re[b] * re[b] + im[b] * im[b];
    }
    for (let m = 0; m < cfg.numMels; m++) {
      let acc = 0;
      for (let b = 0; b < bins; b++) {
        acc += fb[m * bins + b] * power[b];
      }
      out[f * cfg.numMels + m] = Math.log(Math.max(acc, 1e-10));
    }
  }
  for (let m = 0; m < cfg.numMels; m++) {
    let mean = 0;
    for (let f = 0; f < frames; f++) mean += out[f * cfg.numMels + m];
    mean /= frames;
    for (let f = 0; f < frames; f++) out[f * cfg.numMels + m] -= mean;
  }
  return { frames, dim: cfg.numMels, data: out };
}
