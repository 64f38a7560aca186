/**
 * Data plumbing between the transcription toolkit and the toy model.
 *
 * The toolkit is consumed strictly through its command line: `simulate`
 * produces the mixture manifest and WAVs we train on, `group` rebuilds
 * the utterance groups we key hypotheses by, `sot decode` splits emitted
 * serialized text into channels, and `score` consumes the result. This
 * module reads those artifacts and prepares training examples.
 */

import { execFileSync } from "node:child_process";
import * as path from "node:path";

import { DEFAULT_FEATURES, FeatureConfig, logMel } from "./features";
import { TrainingExample } from "./model";
import { Tensor } from "./tensor";
import { readJsonl, readWav, writeJsonl } from "./util";
import { Vocab } from "./vocab";

/** Invoke the transcription toolkit CLI; returns captured stdout. */
export function runSotkit(args: string[], cwd?: string): string {
  const python = process.env.SOTKIT_PYTHON ?? "python3";
  try {
    return execFileSync(python, ["-m", "sotkit", ...args], {
      cwd,
      encoding: "utf8",
      stdio: ["ignore", "pipe", "pipe"],
    });
  } catch (err) {
    const e = err as { status?: number; stderr?: string };
    throw new Error(
      `sotkit ${args[0]} failed (exit ${e.status ?? "?"}): ${e.stderr ?? String(err)}`,
    );
  }
}

export interface ManifestEntry {
  sourceId: string;
  speaker: string;
  offsetS: number;
  durationS: number;
  transcript: string;
}

export interface MixtureRecord {
  mixtureId: string;
  wavPath: string;
  sotText: string;
  numSpeakers: number;
  speedFactor: number;
  entries: ManifestEntry[];
}

function asNumber(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`${what} is not a finite number`);
  }
  return value;
}

function asString(value: unknown, what: string): string {
  if (typeof value !== "string") {
    throw new Error(`${what} is not a string`);
  }
  return value;
}

/** Read a simulator manifest; WAV paths resolve relative to it. */
export function readManifest(manifestPath: string): MixtureRecord[] {
  const base = path.dirname(manifestPath);
  const records: MixtureRecord[] = [];
  for (const rec of readJsonl(manifestPath)) {
    const entriesRaw = rec.entries;
    if (!Array.isArray(entriesRaw) || entriesRaw.length === 0) {
      throw new Error(`${manifestPath}: mixture without entries`);
    }
    const entries = entriesRaw.map((e): ManifestEntry => {
      const obj = e as Record<string, unknown>;
      return {
        sourceId: asString(obj.source_id, "entries.source_id"),
        speaker: asString(obj.speaker, "entries.speaker"),
        offsetS: asNumber(obj.offset_s, "entries.offset_s"),
        durationS: asNumber(obj.duration_s, "entries.duration_s"),
        transcript: asString(obj.transcript, "entries.transcript"),
      };
    });
    records.push({
      mixtureId: asString(rec.mixture_id, "mixture_id"),
      wavPath: path.join(base, asString(rec.wav, "wav")),
      sotText: asString(rec.sot_text, "sot_text"),
      numSpeakers: asNumber(rec.num_speakers, "num_speakers"),
      speedFactor: asNumber(rec.speed_factor, "speed_factor"),
      entries,
    });
  }
  if (records.length === 0) {
    throw new Error(`${manifestPath}: empty manifest`);
  }
  return records;
}

/**
 * Write the reference utterance file for scoring: one session per
 * mixture, one utterance per placed source. Durations are taken from
 * the manifest, so this is only valid for speed factor 1.0 renders;
 * other factors would shift the audio relative to these times.
 */
export function writeRefs(mixtures: MixtureRecord[], refsPath: string): void {
  const records: Record<string, unknown>[] = [];
  for (const mix of mixtures) {
    if (mix.speedFactor !== 1.0) {
      throw new Error(
        `mixture ${mix.mixtureId} has speed factor ${mix.speedFactor}; ` +
          "reference timing requires 1.0",
      );
    }
    mix.entries.forEach((entry, i) => {
      records.push({
        session_id: mix.mixtureId,
        utterance_id: `${mix.mixtureId}-u${i}`,
        speaker: entry.speaker,
        start_s: entry.offsetS,
        end_s: entry.offsetS + entry.durationS,
        text: entry.transcript,
      });
    });
  }
  writeJsonl(refsPath, records);
}

/**
 * Map each session to its single utterance group. The simulator places
 * every source overlapping its predecessor, so a mixture is exactly one
 * group; anything else means the inputs were not built for this flow.
 */
export function sessionGroupIds(groupsPath: string): Map<string, string> {
  const bySession = new Map<string, string>();
  for (const rec of readJsonl(groupsPath)) {
    const session = asString(rec.session_id, "session_id");
    const group = asString(rec.group_id, "group_id");
    if (bySession.has(session)) {
      throw new Error(`session ${session} split into multiple groups`);
    }
    bySession.set(session, group);
  }
  return bySession;
}

/** Load WAVs, extract features, and encode targets for training. */
export function loadExamples(
  mixtures: MixtureRecord[],
  vocab: Vocab,
  featCfg: FeatureConfig = DEFAULT_FEATURES,
): TrainingExample[] {
  return mixtures.map((mix) => {
    const wav = readWav(mix.wavPath);
    if (wav.sampleRate !== featCfg.sampleRate) {
      throw new Error(
        `${mix.wavPath}: sample rate ${wav.sampleRate}, expected ${featCfg.sampleRate}`,
      );
    }
    const feats = logMel(wav.samples, featCfg);
    return {
      features: new Tensor(feats.frames, feats.dim, feats.data),
      target: vocab.encodeSotText(mix.sotText),
    };
  });
}
