/**
 * Dataset access: MNIST from local IDX files (optionally gzipped, fetched on
 * demand with MD5 verification), plus a deterministic synthetic fallback for
 * protocol and smoke tests on machines without the dataset.
 */
import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";
import * as zlib from "node:zlib";

export interface Dataset {
  trainImages: Float32Array; // N*h*w*c, values in [0, 1]
  trainLabels: Int32Array;
  testImages: Float32Array;
  testLabels: Int32Array;
  h: number;
  w: number;
  c: number;
  classes: number;
  name: string;
}

const MNIST_FILES = [
  { name: "train-images-idx3-ubyte", md5gz: "f68b3c2dcbeaaa9fbdd348bbdeb94873" },
  { name: "train-labels-idx1-ubyte", md5gz: "d53e105ee54ea40749a09fcbcd1e9432" },
  { name: "t10k-images-idx3-ubyte", md5gz: "9fb629c4189551a2d022fa330f9573f3" },
  { name: "t10k-labels-idx1-ubyte", md5gz: "ec29112dd5afa0611ce80d1b7f02629c" },
];
const MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/";

function parseIdxImages(buf: Buffer): { data: Float32Array; n: number; h: number; w: number } {
  if (buf.readUInt32BE(0) !== 2051) throw new Error("bad IDX image magic");
  const n = buf.readUInt32BE(4);
  const h = buf.readUInt32BE(8);
  const w = buf.readUInt32BE(12);
  const data = new Float32Array(n * h * w);
  for (let i = 0; i < data.length; i++) data[i] = buf[16 + i] / 255;
  return { data, n, h, w };
}

function parseIdxLabels(buf: Buffer): Int32Array {
  if (buf.readUInt32BE(0) !== 2049) throw new Error("bad IDX label magic");
  const n = buf.readUInt32BE(4);
  const labels = new Int32Array(n);
  for (let i = 0; i < n; i++) labels[i] = buf[8 + i];
  return labels;
}

function readIdx(dir: string, name: string): Buffer {
  const plain = path.join(dir, name);
  if (fs.existsSync(plain)) return fs.readFileSync(plain);
  const gz = `${plain}.gz`;
  if (fs.existsSync(gz)) return zlib.gunzipSync(fs.readFileSync(gz));
  throw new Error(`missing ${name}[.gz] in ${dir}`);
}

async function fetchFile(dir: string, name: string, md5gz: string): Promise<void> {
  const target = path.join(dir, `${name}.gz`);
  if (fs.existsSync(target) || fs.existsSync(path.join(dir, name))) return;
  const res = await fetch(`${MNIST_MIRROR}${name}.gz`);
  if (!res.ok) throw new Error(`download failed: ${name}.gz (${res.status})`);
  const body = Buffer.from(await res.arrayBuffer());
  const digest = crypto.createHash("md5").update(body).digest("hex");
  if (digest !== md5gz) {
    throw new Error(`checksum mismatch for ${name}.gz: ${digest} != ${md5gz}`);
  }
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(target, body);
}

/** Load MNIST from dataDir, downloading (with checksum checks) when absent. */
export async function loadMnist(dataDir: string, download = true): Promise<Dataset> {
  if (download) {
    for (const file of MNIST_FILES) {
      await fetchFile(dataDir, file.name, file.md5gz);
    }
  }
  const train = parseIdxImages(readIdx(dataDir, MNIST_FILES[0].name));
  const trainLabels = parseIdxLabels(readIdx(dataDir, MNIST_FILES[1].name));
  const test = parseIdxImages(readIdx(dataDir, MNIST_FILES[2].name));
  const testLabels = parseIdxLabels(readIdx(dataDir, MNIST_FILES[3].name));
  if (train.n !== trainLabels.length || test.n !== testLabels.length) {
    throw new Error("image/label count mismatch");
  }
  return {
    trainImages: train.data,
    trainLabels,
    testImages: test.data,
    testLabels,
    h: train.h,
    w: train.w,
    c: 1,
    classes: 10,
    name: "mnist",
  };
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Deterministic stand-in dataset: each image is noise plus a bright column
 * band whose horizontal position encodes the label, so small models learn it
 * within an epoch or two. Not MNIST; exists so the protocol and training loop
 * can be exercised end to end without the real files.
 */
export function syntheticDataset(
  h: number,
  w: number,
  c: number,
  classes: number,
  trainCount = 2048,
  testCount = 512,
  seed = 7,
): Dataset {
  const rand = mulberry32(seed);
  const make = (count: number) => {
    const images = new Float32Array(count * h * w * c);
    const labels = new Int32Array(count);
    for (let i = 0; i < count; i++) {
      const label = Math.floor(rand() * classes);
      labels[i] = label;
      const bandLo = Math.floor((label / classes) * w);
      const bandHi = Math.floor(((label + 1) / classes) * w);
      for (let y = 0; y < h; y++) {
        for (let x = 0; x < w; x++) {
          for (let k = 0; k < c; k++) {
            const inBand = x >= bandLo && x < bandHi;
            images[((i * h + y) * w + x) * c + k] = inBand ? 0.9 + 0.1 * rand() : 0.1 * rand();
          }
        }
      }
    }
    return { images, labels };
  };
  const train = make(trainCount);
  const test = make(testCount);
  return {
    trainImages: train.images,
    trainLabels: train.labels,
    testImages: test.images,
    testLabels: test.labels,
    h,
    w,
    c,
    classes,
    name: "synthetic",
  };
}
