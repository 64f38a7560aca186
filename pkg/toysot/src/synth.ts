/**
 * Deterministic synthetic speech stand-in for experiments.
 *
 * Each character maps to a fixed two-partial tone, words are tone runs
 * with short gaps, and speakers differ by detune and brightness. The
 * clips are trivially learnable yet follow the pool contract of the
 * transcription toolkit's simulator: mono 16 kHz WAV plus a JSONL pool
 * file with source_id / speaker / transcript / wav fields.
 */

import * as path from "node:path";
import * as fs from "node:fs";

import { makeRng, writeJsonl, writeWav } from "./util";

const CHAR_SEG_S = 0.14;
const WORD_GAP_S = 0.1;
const EDGE_PAD_S = 0.06;
const PEAK = 0.3;

export const LEXICON = [
  "bed",
  "cat",
  "dog",
  "fig",
  "gold",
  "hat",
  "iris",
  "jade",
  "kite",
  "lime",
  "moon",
  "nest",
];

function charFreq(ch: string): number {
  const idx = ch.charCodeAt(0) - 97;
  if (idx < 0 || idx > 25) {
    throw new Error(`synth lexicon must be lowercase a-z, got ${JSON.stringify(ch)}`);
  }
  return 300 + 115 * idx;
}

/** Render one word as a tone run for the given speaker index. */
function wordWave(word: string, speaker: number, sampleRate: number): Float64Array {
  const segLen = Math.round(CHAR_SEG_S * sampleRate);
  const out = new Float64Array(segLen * word.length);
  const detune = 1 + 0.012 * (speaker - 2.5);
  const brightness = 0.12 + 0.05 * speaker;
  for (let c = 0; c < word.length; c++) {
    const f = charFreq(word[c]) * detune;
    for (let i = 0; i < segLen; i++) {
      const t = i / sampleRate;
      const env = Math.sin((Math.PI * i) / segLen);
      out[c * segLen + i] =
        env * (0.8 * Math.sin(2 * Math.PI * f * t) + brightness * Math.sin(4 * Math.PI * f * t));
    }
  }
  return out;
}

/** Render a clip of words with gaps and edge padding, peak-normalized. */
export function clipWave(words: string[], speaker: number, sampleRate: number): Float64Array {
  const pad = Math.round(EDGE_PAD_S * sampleRate);
  const gap = Math.round(WORD_GAP_S * sampleRate);
  const waves = words.map((w) => wordWave(w, speaker, sampleRate));
  let total = 2 * pad + (words.length - 1) * gap;
  for (const w of waves) total += w.length;
  const out = new Float64Array(total);
  let pos = pad;
  for (let i = 0; i < waves.length; i++) {
    out.set(waves[i], pos);
    pos += waves[i].length + gap;
  }
  let peak = 0;
  for (let i = 0; i < out.length; i++) peak = Math.max(peak, Math.abs(out[i]));
  if (peak > 0) {
    const s = PEAK / peak;
    for (let i = 0; i < out.length; i++) out[i] *= s;
  }
  return out;
}

export interface PoolOptions {
  outDir: string;
  seed: number;
  speakers: number;
  clipsPerSpeaker: number;
  sampleRate: number;
}

/** Generate WAV clips plus pool.jsonl; returns the pool file path. */
export function generatePool(opts: PoolOptions): string {
  fs.mkdirSync(opts.outDir, { recursive: true });
  const rng = makeRng(opts.seed);
  const records: Record<string, unknown>[] = [];
  for (let s = 0; s < opts.speakers; s++) {
    for (let c = 0; c < opts.clipsPerSpeaker; c++) {
      const wordCount = 1 + Math.floor(rng() * 2);
      const words: string[] = [];
      for (let w = 0; w < wordCount; w++) {
        words.push(LEXICON[Math.floor(rng() * LEXICON.length)]);
      }
      const clip = clipWave(words, s, opts.sampleRate);
      const sourceId = `spk${s}-c${String(c).padStart(2, "0")}`;
      const wavName = `${sourceId}.wav`;
      writeWav(path.join(opts.outDir, wavName), clip, opts.sampleRate);
      records.push({
        source_id: sourceId,
        speaker: `spk${s}`,
        transcript: words.join(" "),
        wav: wavName,
      });
    }
  }
  const poolPath = path.join(opts.outDir, "pool.jsonl");
  writeJsonl(poolPath, records);
  return poolPath;
}
