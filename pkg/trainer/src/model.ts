/**
 * Materializes an architecture export as a trainable tf.LayersModel:
 * one framework layer per graph node, honoring kernel/stride/padding/filters
 * exactly so the trainable-parameter count reproduces the export's analytic
 * param_count to the digit.
 *
 * Counting conventions mirrored from the exporter: all convs and denses carry
 * biases, separable convs bias only the pointwise stage, batch-norm has 2*c
 * trainable weights (moving statistics are non-trainable).
 */
import * as tf from "@tensorflow/tfjs";
import { ArchitectureExport, ArchNodeSpec, assertExport } from "./types.js";

export interface BuiltModel {
  model: tf.LayersModel;
  /** symbolic output of every graph node, keyed by node id */
  nodeTensors: Map<number, tf.SymbolicTensor>;
}

function attr(node: ArchNodeSpec, key: string): number {
  const value = node.attrs[key];
  if (typeof value !== "number") {
    throw new Error(`node ${node.id} (${node.op}): missing numeric attr '${key}'`);
  }
  return value;
}

export function buildModel(doc: ArchitectureExport, seed = 0): BuiltModel {
  const exportDoc = assertExport(doc);
  const tensors = new Map<number, tf.SymbolicTensor>();
  let input: tf.SymbolicTensor | undefined;

  for (const node of exportDoc.graph.nodes) {
    const inputs = node.inputs.map((i) => {
      const t = tensors.get(i);
      if (!t) throw new Error(`node ${node.id}: unknown input ${i}`);
      return t;
    });
    const one = inputs[0];
    const name = `${node.op}_${node.id}`;
    const layerSeed = seed * 10007 + node.id;
    let out: tf.SymbolicTensor;

    switch (node.op) {
      case "input": {
        const shape = node.attrs["shape"] as number[];
        input = tf.input({ shape: [shape[0], shape[1], shape[2]], name });
        out = input;
        break;
      }
      case "stem_conv":
      case "conv2d":
      case "projection_conv1x1":
        out = tf.layers
          .conv2d({
            name,
            filters: attr(node, "filters"),
            kernelSize: attr(node, "kernel"),
            strides: attr(node, "stride"),
            padding: "same",
            useBias: true,
            kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed }),
          })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "depthwise_sep_conv2d":
        out = tf.layers
          .separableConv2d({
            name,
            filters: attr(node, "filters"),
            kernelSize: attr(node, "kernel"),
            strides: attr(node, "stride"),
            padding: "same",
            useBias: true,
            depthwiseInitializer: tf.initializers.glorotUniform({ seed: layerSeed }),
            pointwiseInitializer: tf.initializers.glorotUniform({ seed: layerSeed + 1 }),
          })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "maxpool":
        out = tf.layers
          .maxPooling2d({
            name,
            poolSize: attr(node, "kernel"),
            strides: attr(node, "stride"),
            padding: "same",
          })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "identity":
        out = one; // pass-through; contributes no layer and no parameters
        break;
      case "batch_norm":
        out = tf.layers.batchNormalization({ name }).apply(one) as tf.SymbolicTensor;
        break;
      case "relu":
        out = tf.layers.activation({ name, activation: "relu" }).apply(one) as tf.SymbolicTensor;
        break;
      case "merge_add":
        out = tf.layers.add({ name }).apply(inputs) as tf.SymbolicTensor;
        break;
      case "merge_concat":
        out = tf.layers.concatenate({ name, axis: -1 }).apply(inputs) as tf.SymbolicTensor;
        break;
      case "upsample2x":
        out = tf.layers
          .upSampling2d({ name, size: [2, 2], interpolation: "nearest" })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "flatten":
        out = tf.layers.flatten({ name }).apply(one) as tf.SymbolicTensor;
        break;
      case "dense":
        out = tf.layers
          .dense({
            name,
            units: attr(node, "units"),
            useBias: true,
            kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed }),
          })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "dropout":
        out = tf.layers
          .dropout({ name, rate: attr(node, "rate"), seed: layerSeed })
          .apply(one) as tf.SymbolicTensor;
        break;
      case "softmax":
        out = tf.layers.activation({ name, activation: "softmax" }).apply(one) as tf.SymbolicTensor;
        break;
      default:
        throw new Error(`unsupported op tag '${node.op}'`);
    }
    tensors.set(node.id, out);
  }

  if (!input) throw new Error("graph has no input node");
  const output = tensors.get(exportDoc.graph.output_id);
  if (!output) throw new Error(`unknown output node ${exportDoc.graph.output_id}`);
  return { model: tf.model({ inputs: input, outputs: output }), nodeTensors: tensors };
}

/** Trainable parameters only, matching the exporter's counting rules. */
export function trainableParamCount(model: tf.LayersModel): number {
  return model.trainableWeights.reduce(
    (sum, weight) => sum + weight.shape.reduce((a: number, b) => a * (b ?? 1), 1),
    0,
  );
}

/** Build and verify against the export's analytic count; throws on mismatch. */
export function buildVerified(doc: ArchitectureExport, seed = 0): BuiltModel {
  const built = buildModel(doc, seed);
  const counted = trainableParamCount(built.model);
  if (counted !== doc.param_count) {
    throw new Error(
      `parameter mismatch: framework counts ${counted}, export says ${doc.param_count}`,
    );
  }
  return built;
}
