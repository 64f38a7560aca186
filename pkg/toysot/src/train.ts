/**
 * Training driver: fit the toy model on a simulator manifest and emit
 * hypotheses ready for group-mode scoring.
 *
 * Configured by a single declarative JSON file (see TrainRunConfig).
 * The run ends with two artifacts in the work directory: hyps_sot.jsonl
 * (raw serialized text per group) and hyps.jsonl (the same text split
 * into channels by the toolkit's deserializer, which is exactly what
 * `score --mode group` ingests).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Adam, DEFAULT_ADAM } from "./adam";
import {
  MixtureRecord,
  loadExamples,
  readManifest,
  runSotkit,
  sessionGroupIds,
  writeRefs,
} from "./data";
import { ToyConfig, ToySotModel, TrainingExample, defaultConfig } from "./model";
import { backward, resetTape } from "./tensor";
import { editDistance, makeRng, writeJsonl } from "./util";
import { Vocab } from "./vocab";

export interface TrainSettings {
  seed: number;
  epochs: number;
  lr: number;
  warmupSteps: number;
  clipNorm: number;
  evalEvery: number;
  targetTokenError: number;
  maxDecodeTokens: number;
}

export const DEFAULT_TRAIN: TrainSettings = {
  seed: 7,
  epochs: 200,
  lr: DEFAULT_ADAM.lr,
  warmupSteps: DEFAULT_ADAM.warmupSteps,
  clipNorm: DEFAULT_ADAM.clipNorm,
  evalEvery: 10,
  targetTokenError: 0,
  maxDecodeTokens: 400,
};

export interface TrainRunConfig {
  model?: Partial<ToyConfig>;
  train?: Partial<TrainSettings>;
  data: {
    manifest: string;
    workDir: string;
  };
}

export interface TrainOutcome {
  model: ToySotModel;
  vocab: Vocab;
  mixtures: MixtureRecord[];
  examples: TrainingExample[];
  hypotheses: string[];
  tokenErrorRate: number;
  finalLoss: number;
  epochsRun: number;
  refsPath: string;
  groupsPath: string;
  hypsSotPath: string;
  hypsPath: string;
}

/** Fraction of target tokens wrong under greedy decoding (edit distance). */
export function tokenErrorRate(model: ToySotModel, examples: TrainingExample[], cap: number): number {
  let errors = 0;
  let total = 0;
  for (const ex of examples) {
    const decoded = model.greedyDecode(ex.features, cap);
    errors += editDistance(decoded, ex.target);
    total += ex.target.length;
  }
  return errors / total;
}

export function runTraining(cfg: TrainRunConfig): TrainOutcome {
  const train: TrainSettings = { ...DEFAULT_TRAIN, ...cfg.train };
  const vocab = new Vocab();
  const mixtures = readManifest(cfg.data.manifest);
  const examples = loadExamples(mixtures, vocab);

  const modelCfg: ToyConfig = { ...defaultConfig(vocab.size), ...cfg.model, vocabSize: vocab.size };
  const model = new ToySotModel(modelCfg, train.seed);

  const workDir = cfg.data.workDir;
  fs.mkdirSync(workDir, { recursive: true });
  const refsPath = path.join(workDir, "refs.jsonl");
  const groupsPath = path.join(workDir, "groups.jsonl");
  writeRefs(mixtures, refsPath);
  runSotkit(["group", "--in", refsPath, "--out", groupsPath]);
  const groupOf = sessionGroupIds(groupsPath);
  for (const mix of mixtures) {
    if (!groupOf.has(mix.mixtureId)) {
      throw new Error(`mixture ${mix.mixtureId} produced no utterance group`);
    }
  }

  const optimizer = new Adam(model.params, {
    ...DEFAULT_ADAM,
    lr: train.lr,
    warmupSteps: train.warmupSteps,
    clipNorm: train.clipNorm,
  });
  const shuffleRng = makeRng(train.seed ^ 0x9e3779b9);
  const dropRng = makeRng(train.seed ^ 0x85ebca6b);
  const order = examples.map((_, i) => i);

  let finalLoss = NaN;
  let epochsRun = 0;
  let errRate = Infinity;
  for (let epoch = 1; epoch <= train.epochs; epoch++) {
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(shuffleRng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let epochLoss = 0;
    model.setTraining(modelCfg.dropout > 0 ? dropRng : null);
    for (const idx of order) {
      resetTape();
      const loss = model.sotLoss([examples[idx]]);
      epochLoss += loss.data[0];
      backward(loss);
      optimizer.step();
    }
    model.setTraining(null);
    finalLoss = epochLoss / examples.length;
    epochsRun = epoch;
    if (epoch % train.evalEvery === 0 || epoch === train.epochs) {
      errRate = tokenErrorRate(model, examples, train.maxDecodeTokens);
      process.stderr.write(
        `epoch ${epoch}: loss ${finalLoss.toFixed(4)} token_err ${(errRate * 100).toFixed(2)}%\n`,
      );
      if (errRate <= train.targetTokenError) break;
    }
  }
  if (!Number.isFinite(errRate)) {
    errRate = tokenErrorRate(model, examples, train.maxDecodeTokens);
  }

  const hypotheses = examples.map((ex) =>
    vocab.decodeIds(model.greedyDecode(ex.features, train.maxDecodeTokens)),
  );
  const hypsSotPath = path.join(workDir, "hyps_sot.jsonl");
  writeJsonl(
    hypsSotPath,
    mixtures.map((mix, i) => ({
      group_id: groupOf.get(mix.mixtureId) as string,
      sot_text: hypotheses[i],
    })),
  );
  const hypsPath = path.join(workDir, "hyps.jsonl");
  runSotkit(["sot", "decode", "--in", hypsSotPath, "--out", hypsPath]);

  return {
    model,
    vocab,
    mixtures,
    examples,
    hypotheses,
    tokenErrorRate: errRate,
    finalLoss,
    epochsRun,
    refsPath,
    groupsPath,
    hypsSotPath,
    hypsPath,
  };
}

export function main(argv: string[]): number {
  let configPath: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--config") {
      configPath = argv[i + 1] ?? null;
      i++;
    } else {
      process.stderr.write(`unknown argument: ${argv[i]}\n`);
      return 1;
    }
  }
  if (configPath === null) {
    process.stderr.write("usage: train --config <config.json>\n");
    return 1;
  }
  let cfg: TrainRunConfig;
  try {
    cfg = JSON.parse(fs.readFileSync(configPath, "utf8")) as TrainRunConfig;
  } catch (err) {
    process.stderr.write(`cannot read config: ${String(err)}\n`);
    return 1;
  }
  try {
    const outcome = runTraining(cfg);
    process.stdout.write(
      JSON.stringify(
        {
          epochs_run: outcome.epochsRun,
          final_loss: outcome.finalLoss,
          token_error_rate: outcome.tokenErrorRate,
          hyps: outcome.hypsPath,
          refs: outcome.refsPath,
          groups: outcome.groupsPath,
        },
        null,
        2,
      ) + "\n",
    );
    return 0;
  } catch (err) {
    process.stderr.write(`training failed: ${String(err)}\n`);
    return 1;
  }
}

if (typeof require !== "undefined" && typeof module !== "undefined" && require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
