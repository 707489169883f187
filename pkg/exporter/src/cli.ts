import * as fs from 'node:fs';
import * as path from 'node:path';

import { synthesizeDataset, loadDataset } from './synth.js';
import { TinyCnn } from './model.js';
import {
  ExportError,
  ExportJob,
  JOB_DEFAULTS,
  exportCheckpoint,
  exportSeries,
  SeriesCheckpoint,
} from './export.js';

const USAGE = `usage: exporter <command> [flags]

commands:
  synth       write a synthetic two-class image set
              --out DIR --count N [--duplicate-pairs P] [--seed S] [--size 16]
  init-model  create (optionally fit) model weights
              --out FILE --seed S [--size 16]
              [--train-on DIR --steps N --lr RATE --flip-labels]
  export      run one checkpoint and write its bundle manifest
              --model FILE --images DIR --out DIR
              [--checkpoint E1] [--layers convA,convB] [--classes a,b]
              [--max-n 32] [--baseline zero] [--fd-check N] [--fd-seed S]
              [--architecture NAME] [--validate-with CMD] [--no-validate]
  series      export several checkpoints plus epoch_metrics.csv
              --model E1=FILE [--model E5=FILE ...] --images DIR --out DIR
              [--phase-boundary 20] (other export flags apply)

The default post-write validation runs "python3 -m camscore"; pass
--no-validate to skip it or --validate-with to point at another core CLI.
`;

class Flags {
  private values = new Map<string, string[]>();
  private seen = new Set<string>();

  constructor(argv: string[], booleans: Set<string>) {
    for (let i = 0; i < argv.length; i++) {
      const arg = argv[i];
      if (!arg.startsWith('--')) throw new ExportError(`unexpected argument ${arg}`);
      let name = arg.slice(2);
      let value: string | null = null;
      const eq = name.indexOf('=');
      if (eq >= 0) {
        value = name.slice(eq + 1);
        name = name.slice(0, eq);
      }
      if (booleans.has(name)) {
        if (value !== null) throw new ExportError(`--${name} takes no value`);
        this.push(name, 'true');
        continue;
      }
      if (value === null) {
        value = argv[++i];
        if (value === undefined) throw new ExportError(`--${name} needs a value`);
      }
      this.push(name, value);
    }
  }

  private push(name: string, value: string): void {
    const list = this.values.get(name) ?? [];
    list.push(value);
    this.values.set(name, list);
  }

  str(name: string, fallback?: string): string {
    const list = this.values.get(name);
    this.seen.add(name);
    if (!list) {
      if (fallback === undefined) throw new ExportError(`--${name} is required`);
      return fallback;
    }
    if (list.length > 1) throw new ExportError(`--${name} given more than once`);
    return list[0];
  }

  num(name: string, fallback?: number): number {
    const raw = this.str(name, fallback === undefined ? undefined : String(fallback));
    const v = Number(raw);
    if (!Number.isFinite(v)) throw new ExportError(`--${name} must be a number, got ${raw}`);
    return v;
  }

  bool(name: string): boolean {
    this.seen.add(name);
    return this.values.has(name);
  }

  list(name: string, fallback: string): string[] {
    return this.str(name, fallback)
      .split(',')
      .map((s) => s.trim())
      .filter((s) => s.length > 0);
  }

  repeated(name: string): string[] {
    this.seen.add(name);
    return this.values.get(name) ?? [];
  }

  rejectUnknown(): void {
    for (const name of this.values.keys()) {
      if (!this.seen.has(name)) throw new ExportError(`unknown flag --${name}`);
    }
  }
}

function jobFromFlags(flags: Flags, modelPath: string, checkpointId: string, outDir: string): ExportJob {
  const validateWith = flags.bool('no-validate')
    ? null
    : flags.str('validate-with', 'python3 -m camscore').split(/\s+/);
  return {
    modelPath,
    imageDir: flags.str('images'),
    classNames: flags.list('classes', '0,1'),
    targetLayers: flags.list('layers', 'convA,convB'),
    checkpointId,
    outDir,
    scorecamMaxN: flags.num('max-n', JOB_DEFAULTS.scorecamMaxN),
    scorecamBaseline: flags.str('baseline', JOB_DEFAULTS.scorecamBaseline) as 'zero',
    fdPositions: flags.num('fd-check', JOB_DEFAULTS.fdPositions),
    fdSeed: flags.num('fd-seed', JOB_DEFAULTS.fdSeed),
    validateWith,
    architecture: flags.str('architecture', JOB_DEFAULTS.architecture),
  };
}

function cmdSynth(flags: Flags): void {
  const outDir = flags.str('out');
  const index = synthesizeDataset(outDir, {
    count: flags.num('count', 32),
    duplicatePairs: flags.num('duplicate-pairs', 0),
    seed: flags.num('seed', 1),
    size: flags.num('size', 16),
  });
  flags.rejectUnknown();
  console.log(`${path.join(outDir, 'index.json')}: ${index.images.length} images`);
}

function cmdInitModel(flags: Flags): void {
  const outPath = flags.str('out');
  let model = TinyCnn.init(flags.num('seed', 1), flags.num('size', 16));
  const trainDir = flags.str('train-on', '');
  const steps = flags.num('steps', 60);
  const lr = flags.num('lr', 0.05);
  const flip = flags.bool('flip-labels');
  flags.rejectUnknown();
  if (trainDir) {
    const ds = loadDataset(trainDir);
    const pixels = ds.index.images.map((img) => ds.pixels.get(img.image_id)!);
    const labels = ds.index.images.map((img) => (flip ? 1 - img.label : img.label));
    model = model.train(pixels, labels, steps, lr);
  } else if (flip) {
    throw new ExportError('--flip-labels only makes sense with --train-on');
  }
  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  model.save(outPath);
  console.log(outPath);
}

function cmdExport(flags: Flags): void {
  const job = jobFromFlags(flags, flags.str('model'), flags.str('checkpoint', 'E1'), flags.str('out'));
  flags.rejectUnknown();
  const manifestPath = exportCheckpoint(job);
  console.log(manifestPath);
}

function cmdSeries(flags: Flags): void {
  const specs = flags.repeated('model');
  if (specs.length === 0) throw new ExportError('--model E<epoch>=<weights file> is required');
  const checkpoints: SeriesCheckpoint[] = specs.map((spec) => {
    const eq = spec.indexOf('=');
    if (eq <= 0) throw new ExportError(`--model wants LABEL=FILE, got ${spec}`);
    return { checkpointId: spec.slice(0, eq), modelPath: spec.slice(eq + 1) };
  });
  const outDir = flags.str('out');
  const boundary = flags.num('phase-boundary', 20);
  const base = jobFromFlags(flags, '', '', '');
  flags.rejectUnknown();
  const { manifestPaths, metricsPath } = exportSeries(checkpoints, base, outDir, boundary);
  for (const p of manifestPaths) console.log(p);
  console.log(metricsPath);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  const booleans = new Set(['no-validate', 'flip-labels']);
  try {
    if (!command || command === '--help' || command === 'help') {
      process.stdout.write(USAGE);
      return command ? 0 : 2;
    }
    const flags = new Flags(rest, booleans);
    switch (command) {
      case 'synth':
        cmdSynth(flags);
        return 0;
      case 'init-model':
        cmdInitModel(flags);
        return 0;
      case 'export':
        cmdExport(flags);
        return 0;
      case 'series':
        cmdSeries(flags);
        return 0;
      default:
        process.stderr.write(`error: unknown command ${command}\n${USAGE}`);
        return 2;
    }
  } catch (err) {
    if (err instanceof ExportError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`internal error: ${(err as Error).stack ?? err}\n`);
    return 1;
  }
}

const entry = process.argv[1] ? path.resolve(process.argv[1]) : '';
if (entry && import.meta.url === `file://${entry}`) {
  process.exit(main(process.argv.slice(2)));
}
