/**
 * Training and evaluation: default Adam, categorical cross-entropy, accuracy
 * measured on the held-out test split. Shuffling is disabled and every layer
 * initializer is seeded, so identical seeds reproduce identical runs.
 */
import * as tf from "@tensorflow/tfjs";
import { Dataset } from "./mnist.js";
import { TrainingBudget } from "./types.js";

export interface EvalOutcome {
  accuracy: number;
  split: string;
}

export async function trainAndEvaluate(
  model: tf.LayersModel,
  budget: TrainingBudget,
  data: Dataset,
): Promise<EvalOutcome> {
  const xTrain = tf.tensor4d(data.trainImages, [data.trainLabels.length, data.h, data.w, data.c]);
  const yTrain = tf.oneHot(tf.tensor1d(data.trainLabels, "int32"), data.classes);
  const xTest = tf.tensor4d(data.testImages, [data.testLabels.length, data.h, data.w, data.c]);
  const yTest = tf.oneHot(tf.tensor1d(data.testLabels, "int32"), data.classes);
  try {
    model.compile({
      optimizer: tf.train.adam(),
      loss: "categoricalCrossentropy",
      metrics: ["accuracy"],
    });
    if (budget.epochs > 0) {
      await model.fit(xTrain, yTrain, {
        epochs: budget.epochs,
        batchSize: budget.batch_size,
        shuffle: false,
        verbose: 0,
      });
    }
    const scores = model.evaluate(xTest, yTest, {
      batchSize: budget.batch_size,
    }) as tf.Scalar[];
    const accuracy = (await scores[1].data())[0];
    scores.forEach((s) => s.dispose());
    return { accuracy, split: "test" };
  } finally {
    xTrain.dispose();
    yTrain.dispose();
    xTest.dispose();
    yTest.dispose();
  }
}
