/**
 * DGT1 binary descriptor-grid files.
 *
 * Layout (everything little-endian):
 *   bytes 0..3   magic "DGT1"
 *   bytes 4..19  version, T, a, D as uint32
 *   then         T * a * a * D float32 in [t][i][j][k] row-major order
 */

import { writeFileSync, readFileSync } from 'fs'

export const DGT_MAGIC = 'DGT1'
export const DGT_VERSION = 1
const HEADER_BYTES = 20

export interface DescriptorGrid {
  frames: number
  gridSize: number
  dim: number
  /** length frames * gridSize^2 * dim, [t][i][j][k] row-major */
  data: Float32Array
}

export function gridValue(
  grid: DescriptorGrid,
  t: number,
  i: number,
  j: number,
  k: number,
): number {
  const { gridSize, dim } = grid
  return grid.data[((t * gridSize + i) * gridSize + j) * dim + k]
}

export function encodeDgt(grid: DescriptorGrid): Buffer {
  const { frames, gridSize, dim, data } = grid
  const expected = frames * gridSize * gridSize * dim
  if (data.length !== expected) {
    throw new Error(
      `payload mismatch: header implies ${expected} floats, got ${data.length}`,
    )
  }
  for (let n = 0; n < data.length; n++) {
    if (!Number.isFinite(data[n])) {
      throw new Error(`non-finite value at flat index ${n}`)
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + expected * 4)
  buf.write(DGT_MAGIC, 0, 'ascii')
  buf.writeUInt32LE(DGT_VERSION, 4)
  buf.writeUInt32LE(frames, 8)
  buf.writeUInt32LE(gridSize, 12)
  buf.writeUInt32LE(dim, 16)
  for (let n = 0; n < expected; n++) {
    buf.writeFloatLE(data[n], HEADER_BYTES + n * 4)
  }
  return buf
}

export function writeDgt(grid: DescriptorGrid, path: string): void {
  writeFileSync(path, encodeDgt(grid))
}

export function readDgt(path: string): DescriptorGrid {
  const buf = readFileSync(path)
  if (buf.length < HEADER_BYTES) {
    throw new Error(`${path}: truncated header (${buf.length} bytes)`)
  }
  const magic = buf.toString('ascii', 0, 4)
  if (magic !== DGT_MAGIC) {
    throw new Error(`${path}: bad magic ${JSON.stringify(magic)}`)
  }
  const version = buf.readUInt32LE(4)
  if (version !== DGT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`)
  }
  const frames = buf.readUInt32LE(8)
  const gridSize = buf.readUInt32LE(12)
  const dim = buf.readUInt32LE(16)
  const expected = frames * gridSize * gridSize * dim
  if (buf.length - HEADER_BYTES !== expected * 4) {
    throw new Error(
      `${path}: payload mismatch, header implies ${expected * 4} bytes, ` +
        `found ${buf.length - HEADER_BYTES}`,
    )
  }
  const data = new Float32Array(expected)
  for (let n = 0; n < expected; n++) {
    data[n] = buf.readFloatLE(HEADER_BYTES + n * 4)
  }
  return { frames, gridSize, dim, data }
}
