/**
 * Export job: run every sampled frame through the feature model and stack
 * the pooling activations into one DGT1 descriptor grid.
 *
 * Channel k of spatial cell (i, j) becomes descriptor coordinate k of grid
 * cell (i, j), i.e. the tensor layout [t][i][j][k] is written unchanged.
 */

import { DescriptorGrid, writeDgt } from './dgt'
import { FeatureModel, forward, loadFeatureModel } from './model'
import { frameToTensor, listFrames, sampleFrames } from './preprocess'

export interface ExportJob {
  /** directory of .png/.jpg frames */
  input: string
  /** 'vgg16' | 'tiny512', or anything when modelPath is given */
  modelId: string
  /** tfjs LayersModel URL (file://...) with trained weights */
  modelPath?: string
  /** frames per second kept from the source (default 1) */
  fps?: number
  /** frame rate the input directory was captured at (default 30) */
  sourceFps?: number
  /** seed for the built-in models' weights */
  seed?: number
  output: string
}

export interface ExportResult {
  frames: number
  gridSize: number
  dim: number
  framePaths: string[]
  model: string
}

export async function runExport(job: ExportJob): Promise<ExportResult> {
  const all = listFrames(job.input)
  const sampled = sampleFrames(all, job.sourceFps ?? 30, job.fps ?? 1)
  if (sampled.length === 0) {
    throw new Error(`empty input: no frames found in ${job.input}`)
  }
  const model = await loadFeatureModel(job.modelId, {
    seed: job.seed,
    modelPath: job.modelPath,
  })
  const grid = await encodeFrames(model, sampled)
  writeDgt(grid, job.output)
  return {
    frames: grid.frames,
    gridSize: grid.gridSize,
    dim: grid.dim,
    framePaths: sampled,
    model: model.name,
  }
}

export async function encodeFrames(
  model: FeatureModel,
  framePaths: string[],
): Promise<DescriptorGrid> {
  const { gridSize, channels } = model
  const perFrame = gridSize * gridSize * channels
  const data = new Float32Array(framePaths.length * perFrame)
  for (let t = 0; t < framePaths.length; t++) {
    const tensor = frameToTensor(framePaths[t], model.inputSize)
    const activations = forward(model, tensor)
    const values = await activations.data()
    data.set(values, t * perFrame)
    tensor.dispose()
    activations.dispose()
  }
  return { frames: framePaths.length, gridSize, dim: channels, data }
}
