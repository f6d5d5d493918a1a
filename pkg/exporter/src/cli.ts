#!/usr/bin/env node
/** Command line: frames directory in, DGT1 descriptor grid out. */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { runExport } from './export'

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .option('input', {
      type: 'string',
      demandOption: true,
      describe: 'directory of .png/.jpg frames',
    })
    .option('model', {
      type: 'string',
      default: 'vgg16',
      describe: 'vgg16 | tiny512 (seeded weights unless --model-path is given)',
    })
    .option('model-path', {
      type: 'string',
      describe: 'tfjs LayersModel URL, e.g. file://./model/model.json',
    })
    .option('fps', {
      type: 'number',
      default: 1,
      describe: 'frames per second to keep',
    })
    .option('source-fps', {
      type: 'number',
      default: 30,
      describe: 'capture rate of the input frames',
    })
    .option('seed', { type: 'number', default: 1 })
    .option('output', { type: 'string', demandOption: true })
    .strict()
    .parse()

  const result = await runExport({
    input: argv.input,
    modelId: argv.model,
    modelPath: argv['model-path'],
    fps: argv.fps,
    sourceFps: argv['source-fps'],
    seed: argv.seed,
    output: argv.output,
  })
  console.log(
    `exported ${result.frames} frames as (${result.frames}, ${result.gridSize}, ` +
      `${result.gridSize}, ${result.dim}) via ${result.model} -> ${argv.output}`,
  )
  return 0
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err.message ?? err}`)
    process.exit(1)
  })
