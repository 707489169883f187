import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

// The on-disk tensor format is raw little-endian float32, C order. Node
// Buffers share the platform byte order, so refuse to run on BE hardware
// rather than silently writing garbage.
if (os.endianness() !== 'LE') {
  throw new Error('raw .f32 output requires a little-endian platform');
}

export function writeF32(filePath: string, data: Float32Array): void {
  fs.writeFileSync(filePath, Buffer.from(data.buffer, data.byteOffset, data.byteLength));
}

export function readF32(filePath: string, count: number): Float32Array {
  const buf = fs.readFileSync(filePath);
  if (buf.byteLength !== count * 4) {
    throw new Error(`${filePath}: expected ${count * 4} bytes, found ${buf.byteLength}`);
  }
  // copy out so the typed array is not a view into node's buffer pool
  const out = new Float32Array(count);
  out.set(new Float32Array(buf.buffer, buf.byteOffset, count));
  return out;
}

/** Write JSON next to the target, then rename: readers never see a partial file. */
export function atomicWriteJson(filePath: string, value: unknown): void {
  const tmp = path.join(
    path.dirname(filePath),
    `.${path.basename(filePath)}.${process.pid}.tmp`,
  );
  fs.writeFileSync(tmp, JSON.stringify(value, null, 2) + '\n');
  fs.renameSync(tmp, filePath);
}
