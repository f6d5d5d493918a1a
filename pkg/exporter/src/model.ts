/**
 * Feature-extraction models whose output is the final-pooling activation
 * map (spatial a x a, M channels).
 *
 * Built-in topologies use seeded initializers so exports are reproducible;
 * pass a tfjs LayersModel path ("file://...") to use real trained weights.
 * Both built-ins map 224x224x3 input to a 7x7x512 pooling output.
 */

import * as tf from '@tensorflow/tfjs'

export interface FeatureModel {
  name: string
  inputSize: number
  gridSize: number
  channels: number
  net: tf.LayersModel
}

const VGG16_BLOCKS: Array<{ convs: number; filters: number }> = [
  { convs: 2, filters: 64 },
  { convs: 2, filters: 128 },
  { convs: 3, filters: 256 },
  { convs: 3, filters: 512 },
  { convs: 3, filters: 512 },
]

/** Classic 16-layer topology up to its fifth pooling layer (7x7x512). */
function buildVgg16(seed: number): tf.LayersModel {
  const model = tf.sequential()
  let layerSeed = seed
  let first = true
  for (const block of VGG16_BLOCKS) {
    for (let n = 0; n < block.convs; n++) {
      model.add(
        tf.layers.conv2d({
          filters: block.filters,
          kernelSize: 3,
          padding: 'same',
          activation: 'relu',
          kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed++ }),
          biasInitializer: 'zeros',
          ...(first ? { inputShape: [224, 224, 3] } : {}),
        }),
      )
      first = false
    }
    model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }))
  }
  return model
}

/**
 * Small strided network with the same 7x7x512 pooling shape; fast enough
 * for CPU-only smoke tests and the reference export path in this sandbox.
 */
function buildTiny512(seed: number): tf.LayersModel {
  const model = tf.sequential()
  const widths = [16, 32, 64, 128]
  let layerSeed = seed
  let first = true
  for (const filters of widths) {
    model.add(
      tf.layers.conv2d({
        filters,
        kernelSize: 3,
        strides: 2,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed++ }),
        biasInitializer: 'zeros',
        ...(first ? { inputShape: [224, 224, 3] } : {}),
      }),
    )
    first = false
  }
  // 14x14x128 -> conv to 512 channels -> pool to 7x7
  model.add(
    tf.layers.conv2d({
      filters: 512,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed++ }),
      biasInitializer: 'zeros',
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }))
  return model
}

export async function loadFeatureModel(
  modelId: string,
  options: { seed?: number; modelPath?: string } = {},
): Promise<FeatureModel> {
  const seed = options.seed ?? 1
  let net: tf.LayersModel
  if (options.modelPath) {
    try {
      net = await tf.loadLayersModel(options.modelPath)
    } catch (err) {
      throw new Error(`model load failure: ${options.modelPath}: ${err}`)
    }
  } else if (modelId === 'vgg16') {
    net = buildVgg16(seed)
  } else if (modelId === 'tiny512') {
    net = buildTiny512(seed)
  } else {
    throw new Error(`unknown model id ${JSON.stringify(modelId)}; use vgg16 or tiny512`)
  }

  const out = net.outputs[0].shape
  if (out.length !== 4 || out[1] !== out[2] || !out[1] || !out[3]) {
    throw new Error(`model output is not a square a x a x M pooling map: ${out}`)
  }
  const input = net.inputs[0].shape
  return {
    name: options.modelPath ?? modelId,
    inputSize: input[1] as number,
    gridSize: out[1] as number,
    channels: out[3] as number,
    net,
  }
}

/** [h, w, 3] float input -> [a, a, M] pooling activations. */
export function forward(model: FeatureModel, frame: tf.Tensor3D): tf.Tensor3D {
  return tf.tidy(() => {
    const batched = frame.expandDims(0)
    const out = model.net.predict(batched) as tf.Tensor4D
    return out.squeeze([0])
  })
}
