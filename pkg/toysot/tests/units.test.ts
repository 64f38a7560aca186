import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { DEFAULT_FEATURES, logMel } from "../src/features";
import { LEXICON, generatePool } from "../src/synth";
import {
  editDistance,
  makeRng,
  readJsonl,
  readWav,
  writeJsonl,
  writeWav,
} from "../src/util";
import { EOS_ID, EOS_TOKEN, SC_ID, SC_TOKEN, Vocab } from "../src/vocab";

describe("vocabulary", () => {
  it("encodes words, speaker changes, and the terminator", () => {
    const vocab = new Vocab();
    const ids = vocab.encodeSotText(`cat dog ${SC_TOKEN} fig ${EOS_TOKEN}`);
    expect(ids[ids.length - 1]).toBe(EOS_ID);
    expect(Array.from(ids).filter((id) => id === SC_ID).length).toBe(1);
    expect(vocab.decodeIds(ids)).toBe(`cat dog ${SC_TOKEN} fig ${EOS_TOKEN}`);
  });

  it("appends the terminator when the text lacks one", () => {
    const vocab = new Vocab();
    const ids = vocab.encodeSotText("cat");
    expect(ids[ids.length - 1]).toBe(EOS_ID);
    expect(vocab.decodeIds(ids)).toBe(`cat ${EOS_TOKEN}`);
  });

  it("rejects characters outside the vocabulary", () => {
    const vocab = new Vocab();
    expect(() => vocab.encodeSotText("café")).toThrow(/not in vocabulary/);
  });

  it("stops decoding at the first terminator", () => {
    const vocab = new Vocab();
    const ids = [5, EOS_ID, 6, 7];
    expect(vocab.decodeIds(ids)).toContain(EOS_TOKEN);
    expect(vocab.decodeIds(ids).split(EOS_TOKEN)[1].trim()).toBe("");
  });

  it("has three specials plus one id per character", () => {
    expect(new Vocab().size).toBe(3 + " abcdefghijklmnopqrstuvwxyz".length);
  });
});

describe("log-mel features", () => {
  it("follows the frame-count law at 25 ms window / 10 ms hop", () => {
    const samples = new Float64Array(16000);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = Math.sin((2 * Math.PI * 440 * i) / 16000);
    }
    const feats = logMel(samples);
    expect(feats.dim).toBe(80);
    expect(feats.frames).toBe(1 + Math.floor((16000 - 400) / 160));
  });

  it("zero-pads signals shorter than one window to a single frame", () => {
    const feats = logMel(new Float64Array(100));
    expect(feats.frames).toBe(1);
    expect(feats.dim).toBe(DEFAULT_FEATURES.numMels);
  });

  it("mean-normalizes every band over the utterance", () => {
    const rng = makeRng(9);
    const samples = new Float64Array(8000);
    for (let i = 0; i < samples.length; i++) samples[i] = rng() * 0.4 - 0.2;
    const feats = logMel(samples);
    for (let m = 0; m < feats.dim; m++) {
      let mean = 0;
      for (let f = 0; f < feats.frames; f++) mean += feats.data[f * feats.dim + m];
      expect(Math.abs(mean / feats.frames)).toBeLessThan(1e-9);
    }
  });

  it("produces only finite values", () => {
    const feats = logMel(new Float64Array(4000));
    for (const v of feats.data) expect(Number.isFinite(v)).toBe(true);
  });
});

describe("utilities", () => {
  it("computes edit distance", () => {
    expect(editDistance([1, 2, 3], [1, 2, 3])).toBe(0);
    expect(editDistance([], [1, 2])).toBe(2);
    const a = "kitten".split("").map((c) => c.charCodeAt(0));
    const b = "sitting".split("").map((c) => c.charCodeAt(0));
    expect(editDistance(a, b)).toBe(3);
  });

  it("round-trips WAV samples within one quantization step", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "toysot-wav-"));
    try {
      const rng = makeRng(4);
      const samples = new Float64Array(500);
      for (let i = 0; i < samples.length; i++) samples[i] = rng() * 1.8 - 0.9;
      const wavPath = path.join(dir, "t.wav");
      writeWav(wavPath, samples, 16000);
      const back = readWav(wavPath);
      expect(back.sampleRate).toBe(16000);
      expect(back.samples.length).toBe(samples.length);
      for (let i = 0; i < samples.length; i++) {
        expect(Math.abs(back.samples[i] - samples[i])).toBeLessThanOrEqual(1 / 32767);
      }
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });

  it("round-trips JSONL with sorted keys and skips format headers", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "toysot-jsonl-"));
    try {
      const p = path.join(dir, "x.jsonl");
      writeJsonl(p, [{ b: 2, a: 1 }]);
      expect(fs.readFileSync(p, "utf8")).toBe('{"a":1,"b":2}\n');
      fs.writeFileSync(p, '{"_format":"sotkit/1"}\n\n{"a":1}\n');
      expect(readJsonl(p)).toEqual([{ a: 1 }]);
      fs.writeFileSync(p, '{"a":1}\nnot json\n');
      expect(() => readJsonl(p)).toThrow(/x\.jsonl:2/);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});

describe("synthetic pool", () => {
  it("writes clips long enough for the simulator's start-gap constraint", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "toysot-pool-"));
    try {
      const poolPath = generatePool({
        outDir: dir,
        seed: 1,
        speakers: 3,
        clipsPerSpeaker: 2,
        sampleRate: 16000,
      });
      const records = readJsonl(poolPath);
      expect(records.length).toBe(6);
      for (const rec of records) {
        const wav = readWav(path.join(dir, rec.wav as string));
        expect(wav.samples.length / 16000).toBeGreaterThan(0.52);
        let peak = 0;
        for (const s of wav.samples) peak = Math.max(peak, Math.abs(s));
        expect(peak).toBeLessThanOrEqual(0.31);
        for (const word of (rec.transcript as string).split(" ")) {
          expect(LEXICON).toContain(word);
        }
        expect(typeof rec.speaker).toBe("string");
        expect(typeof rec.source_id).toBe("string");
      }
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});
