/** Shared utilities: deterministic RNG, JSONL, and 16-bit WAV I/O. */

import * as fs from "node:fs";

/**
 * SplitMix64-seeded xoshiro-style 32-bit generator (mulberry32). Fast,
 * deterministic per seed, and good enough for parameter init and
 * synthetic-data jitter.
 */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Standard normal via Box-Muller from a uniform source. */
export function makeGaussian(uniform: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const v = spare;
      spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u === 0) u = uniform();
    while (v === 0) v = uniform();
    const mag = Math.sqrt(-2 * Math.log(u));
    spare = mag * Math.sin(2 * Math.PI * v);
    return mag * Math.cos(2 * Math.PI * v);
  };
}

/** Parse a JSONL file, skipping blank lines and a leading format header. */
export function readJsonl(path: string): Record<string, unknown>[] {
  const text = fs.readFileSync(path, "utf8");
  const records: Record<string, unknown>[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${i + 1}: invalid JSON (${String(err)})`);
    }
    if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
      throw new Error(`${path}:${i + 1}: expected a JSON object`);
    }
    const rec = obj as Record<string, unknown>;
    if (i === 0 && typeof rec._format === "string") continue;
    records.push(rec);
  }
  return records;
}

/** Write records as JSONL with sorted keys, one object per line. */
export function writeJsonl(path: string, records: Record<string, unknown>[]): void {
  const lines = records.map((rec) => {
    const sorted: Record<string, unknown> = {};
    for (const key of Object.keys(rec).sort()) sorted[key] = rec[key];
    return JSON.stringify(sorted);
  });
  fs.writeFileSync(path, lines.join("\n") + (lines.length ? "\n" : ""));
}

/** Levenshtein distance between two id sequences (unit costs). */
export function editDistance(a: ArrayLike<number>, b: ArrayLike<number>): number {
  const n = a.length;
  const m = b.length;
  let prev = new Float64Array(m + 1);
  let cur = new Float64Array(m + 1);
  for (let j = 0; j <= m; j++) prev[j] = j;
  for (let i = 1; i <= n; i++) {
    cur[0] = i;
    for (let j = 1; j <= m; j++) {
      const subCost = prev[j - 1] + (a[i - 1] === b[j - 1] ? 0 : 1);
      cur[j] = Math.min(subCost, prev[j] + 1, cur[j - 1] + 1);
    }
    const tmp = prev;
    prev = cur;
    cur = tmp;
  }
  return prev[m];
}

export interface WavData {
  sampleRate: number;
  samples: Float64Array;
}

/** Read a mono 16-bit PCM WAV file into [-1, 1] doubles. */
export function readWav(path: string): WavData {
  const buf = fs.readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let pos = 12;
  let sampleRate = 0;
  let channels = 0;
  let bits = 0;
  let samples: Float64Array | null = null;
  while (pos + 8 <= buf.length) {
    const id = buf.toString("ascii", pos, pos + 4);
    const size = buf.readUInt32LE(pos + 4);
    const body = pos + 8;
    if (id === "fmt ") {
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bits = buf.readUInt16LE(body + 14);
    } else if (id === "data") {
      if (channels !== 1 || bits !== 16) {
        throw new Error(`${path}: expected mono 16-bit PCM, got ${channels}ch ${bits}-bit`);
      }
      const count = Math.floor(size / 2);
      samples = new Float64Array(count);
      for (let i = 0; i < count; i++) {
        samples[i] = buf.readInt16LE(body + i * 2) / 32767;
      }
    }
    pos = body + size + (size % 2);
  }
  if (samples === null || sampleRate === 0) {
    throw new Error(`${path}: missing fmt or data chunk`);
  }
  return { sampleRate, samples };
}

/** Write [-1, 1] doubles as a mono 16-bit PCM WAV file. */
export function writeWav(path: string, samples: Float64Array, sampleRate: number): void {
  const dataSize = samples.length * 2;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20);
  buf.writeUInt16LE(1, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    const scaled = clamped * 32767;
    // Round half away from zero to mirror the transcription toolkit's writer.
    const q = scaled >= 0 ? Math.floor(scaled + 0.5) : Math.ceil(scaled - 0.5);
    buf.writeInt16LE(q, 44 + i * 2);
  }
  fs.writeFileSync(path, buf);
}
