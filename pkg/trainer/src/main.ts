/**
 * Reference evaluator process: builds each requested architecture, trains it
 * on MNIST (or the synthetic stand-in) with the requested budget, and answers
 * over the NDJSON wire protocol until stdin closes.
 *
 * Flags:
 *   --data-dir <dir>   MNIST location (IDX files, fetched if absent); default ./mnist-data
 *   --seed <n>         base seed for weight init and dropout; default 0
 *   --device <name>    tfjs backend to request (e.g. cpu); default cpu
 *   --synthetic        use the deterministic synthetic dataset instead of MNIST
 *   --train-limit <n>  cap the training set size (faster smoke runs)
 *   --test-limit <n>   cap the test set size (faster smoke runs)
 */
import * as tf from "@tensorflow/tfjs";
import { buildVerified } from "./model.js";
import { Dataset, loadMnist, syntheticDataset } from "./mnist.js";
import { serveProtocol } from "./protocol.js";
import { trainAndEvaluate } from "./train.js";
import { EvaluationRequest, EvaluationResponse } from "./types.js";

interface Options {
  dataDir: string;
  seed: number;
  device: string;
  synthetic: boolean;
  trainLimit: number;
  testLimit: number;
}

function parseArgs(argv: string[]): Options {
  const opts: Options = {
    dataDir: "./mnist-data",
    seed: 0,
    device: "cpu",
    synthetic: false,
    trainLimit: 0,
    testLimit: 0,
  };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--data-dir":
        opts.dataDir = argv[++i];
        break;
      case "--seed":
        opts.seed = Number(argv[++i]);
        break;
      case "--device":
        opts.device = argv[++i];
        break;
      case "--synthetic":
        opts.synthetic = true;
        break;
      case "--train-limit":
        opts.trainLimit = Number(argv[++i]);
        break;
      case "--test-limit":
        opts.testLimit = Number(argv[++i]);
        break;
      default:
        process.stderr.write(`unknown flag ${argv[i]}\n`);
        process.exit(2);
    }
  }
  return opts;
}

function capSplits(data: Dataset, trainLimit: number, testLimit: number): Dataset {
  const pixels = data.h * data.w * data.c;
  const out = { ...data };
  if (trainLimit > 0 && data.trainLabels.length > trainLimit) {
    out.trainImages = data.trainImages.slice(0, trainLimit * pixels);
    out.trainLabels = data.trainLabels.slice(0, trainLimit);
  }
  if (testLimit > 0 && data.testLabels.length > testLimit) {
    out.testImages = data.testImages.slice(0, testLimit * pixels);
    out.testLabels = data.testLabels.slice(0, testLimit);
  }
  return out;
}

export function createHandler(opts: Options) {
  const datasets = new Map<string, Promise<Dataset>>();

  const datasetFor = (h: number, w: number, c: number, classes: number): Promise<Dataset> => {
    const key = `${h}x${w}x${c}/${classes}`;
    let ds = datasets.get(key);
    if (!ds) {
      ds = opts.synthetic
        ? Promise.resolve(syntheticDataset(h, w, c, classes, 2048, 512, opts.seed + 7))
        : loadMnist(opts.dataDir).then((d) => {
            if (d.h !== h || d.w !== w || d.c !== c || d.classes !== classes) {
              throw new Error(
                `architecture expects ${h}x${w}x${c}/${classes} but mnist is ${d.h}x${d.w}x${d.c}/10`,
              );
            }
            return d;
          });
      datasets.set(key, ds);
    }
    return ds;
  };

  return async (req: EvaluationRequest): Promise<EvaluationResponse> => {
    const { model } = buildVerified(req.architecture, opts.seed);
    try {
      const inputNode = req.architecture.graph.nodes[req.architecture.graph.input_id];
      const [h, w, c] = inputNode.attrs["shape"] as [number, number, number];
      const outputNode = req.architecture.graph.nodes[req.architecture.graph.output_id];
      const classes = outputNode.out_shape[2];
      const data = capSplits(await datasetFor(h, w, c, classes),
                             opts.trainLimit, opts.testLimit);
      const outcome = await trainAndEvaluate(model, req.budget, data);
      return {
        id: req.id,
        status: "ok",
        accuracy: outcome.accuracy,
        message: `split=${outcome.split} dataset=${data.name} seed=${opts.seed} epochs=${req.budget.epochs}`,
      };
    } finally {
      model.dispose();
    }
  };
}

async function main(): Promise<void> {
  const opts = parseArgs(process.argv.slice(2));
  await tf.setBackend(opts.device === "cpu" ? "cpu" : opts.device);
  await tf.ready();
  await serveProtocol(process.stdin, process.stdout, createHandler(opts));
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("main.js") || entry.endsWith("main.ts")) {
  main().then(
    () => process.exit(0),
    (err) => {
      process.stderr.write(`fatal: ${String(err)}\n`);
      process.exit(1);
    },
  );
}
