/**
 * Frame decoding and canonical inference preprocessing: decode PNG/JPEG,
 * scale the shorter side to the model input size, center crop, map RGB
 * to [0, 1] floats.
 */

import { readFileSync, readdirSync } from 'fs'
import { extname, join } from 'path'

import * as tf from '@tensorflow/tfjs'
import * as jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** RGBA interleaved, 8-bit */
  data: Uint8Array
}

const FRAME_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export function decodeImage(path: string): RgbImage {
  const raw = readFileSync(path)
  const ext = extname(path).toLowerCase()
  if (ext === '.png') {
    const png = PNG.sync.read(raw)
    return { width: png.width, height: png.height, data: new Uint8Array(png.data) }
  }
  if (ext === '.jpg' || ext === '.jpeg') {
    const img = jpeg.decode(raw, { useTArray: true })
    return { width: img.width, height: img.height, data: new Uint8Array(img.data) }
  }
  throw new Error(`unreadable frame ${path}: unsupported extension ${ext}`)
}

/** Sorted list of decodable frame files in a directory. */
export function listFrames(dir: string): string[] {
  let entries: string[]
  try {
    entries = readdirSync(dir)
  } catch (err) {
    throw new Error(`unreadable frames: ${dir}: ${err}`)
  }
  return entries
    .filter((name) => FRAME_EXTENSIONS.has(extname(name).toLowerCase()))
    .sort()
    .map((name) => join(dir, name))
}

/**
 * Subsample a frame list from sourceFps down to targetFps by stride
 * (default export rate is 1 frame per second).
 */
export function sampleFrames(
  frames: string[],
  sourceFps: number,
  targetFps: number,
): string[] {
  if (sourceFps <= 0 || targetFps <= 0) {
    throw new Error('frame rates must be positive')
  }
  const stride = Math.max(1, Math.round(sourceFps / targetFps))
  return frames.filter((_, index) => index % stride === 0)
}

/** Decode + scale shorter side to size + center crop + scale to [0, 1]. */
export function frameToTensor(path: string, size: number): tf.Tensor3D {
  const image = decodeImage(path)
  return tf.tidy(() => {
    const rgba = tf.tensor3d(image.data, [image.height, image.width, 4], 'int32')
    const rgb = rgba.slice([0, 0, 0], [image.height, image.width, 3]).toFloat()
    const scale = size / Math.min(image.height, image.width)
    const newH = Math.max(size, Math.round(image.height * scale))
    const newW = Math.max(size, Math.round(image.width * scale))
    const resized = tf.image.resizeBilinear(rgb as tf.Tensor3D, [newH, newW], true)
    const top = Math.floor((newH - size) / 2)
    const left = Math.floor((newW - size) / 2)
    const cropped = resized.slice([top, left, 0], [size, size, 3])
    return cropped.div(255.0) as tf.Tensor3D
  })
}
