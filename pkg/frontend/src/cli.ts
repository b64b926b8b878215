#!/usr/bin/env node
/**
 * CLI for the reference trainer. `train` consumes a sweepforge dataset
 * directory; `predict` emits masks compatible with `sweepforge evaluate`.
 */
import * as fs from 'fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { DEFAULT_AUGMENT, NO_AUGMENT } from './augment';
import { predict } from './predict';
import { DEFAULT_TRAIN, TrainConfig, train } from './train';

function loadConfigFile(p?: string): Partial<TrainConfig> {
  if (!p) return {};
  return JSON.parse(fs.readFileSync(p, 'utf-8')) as Partial<TrainConfig>;
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName('sweepforge-trainer')
    .command(
      'train',
      'train a patient-specific segmentation network on a generated dataset',
      (y) => y
        .option('dataset', { type: 'string', demandOption: true, describe: 'dataset directory (manifest.json)' })
        .option('out', { type: 'string', demandOption: true, describe: 'checkpoint directory' })
        .option('config', { type: 'string', describe: 'JSON file of TrainConfig overrides' })
        .option('epochs', { type: 'number' })
        .option('lr', { type: 'number', describe: 'initial learning rate' })
        .option('seed', { type: 'number' })
        .option('resolution', { type: 'number', describe: 'training resolution (divisor of native)' })
        .option('no-augment', { type: 'boolean', default: false }),
      async (argv) => {
        const fileCfg = loadConfigFile(argv.config);
        const config: TrainConfig = {
          ...DEFAULT_TRAIN,
          ...fileCfg,
          datasetDir: argv.dataset,
          checkpointDir: argv.out,
        };
        if (argv.epochs !== undefined) config.epochs = argv.epochs;
        if (argv.lr !== undefined) config.initialLr = argv.lr;
        if (argv.seed !== undefined) config.seed = argv.seed;
        if (argv.resolution !== undefined) config.trainResolution = argv.resolution;
        if (argv['no-augment']) config.augment = NO_AUGMENT;
        if (!config.augment) config.augment = DEFAULT_AUGMENT;
        const history = await train(config);
        process.stdout.write(JSON.stringify({
          checkpoint: argv.out,
          epochs: config.epochs,
          finalLoss: history.epochLoss[history.epochLoss.length - 1],
          heldInDice: history.heldInDice,
          wallSeconds: history.wallSeconds,
        }, null, 2) + '\n');
      })
    .command(
      'predict',
      'segment a directory of PNG slices with a trained checkpoint',
      (y) => y
        .option('checkpoint', { type: 'string', demandOption: true })
        .option('images', { type: 'string', demandOption: true })
        .option('out', { type: 'string', demandOption: true })
        .option('threshold', { type: 'number', default: 0.5 })
        .option('batch', { type: 'number', default: 8 })
        .option('pattern', { type: 'string', describe: 'only files containing this substring' }),
      async (argv) => {
        const result = await predict({
          checkpointDir: argv.checkpoint,
          imagesDir: argv.images,
          outDir: argv.out,
          threshold: argv.threshold,
          batch: argv.batch,
          pattern: argv.pattern,
        });
        process.stdout.write(JSON.stringify(result, null, 2) + '\n');
      })
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      process.stderr.write(`error: ${msg ?? err?.message}\n`);
      process.exit(err ? 2 : 1);
    })
    .parseAsync();
}

main().catch((err) => {
  process.stderr.write(`error: ${err?.message ?? err}\n`);
  process.exit(2);
});
