/** Wire-format and architecture-export types shared across the trainer. */

export interface TensorShape3 {
  h: number;
  w: number;
  c: number;
}

export interface ArchNodeSpec {
  id: number;
  op: string;
  attrs: Record<string, unknown>;
  inputs: number[];
  out_shape: [number, number, number];
}

export interface ArchitectureExport {
  format_version: string;
  genome: { digits: number[]; packed: string[] };
  graph: { nodes: ArchNodeSpec[]; input_id: number; output_id: number };
  param_count: number;
  config_fingerprint: string;
}

export interface TrainingBudget {
  epochs: number;
  batch_size: number;
  dropout: number;
}

export interface EvaluationRequest {
  id: number;
  genome: number[];
  architecture: ArchitectureExport;
  budget: TrainingBudget;
}

export interface EvaluationResponse {
  id: number;
  status: "ok" | "error";
  accuracy?: number;
  message?: string;
}

export const SUPPORTED_FORMAT_VERSION = "1";

export function assertExport(doc: unknown): ArchitectureExport {
  const d = doc as ArchitectureExport;
  if (!d || typeof d !== "object") {
    throw new Error("architecture export must be an object");
  }
  if (d.format_version !== SUPPORTED_FORMAT_VERSION) {
    throw new Error(`unsupported format_version ${String(d.format_version)}`);
  }
  if (!d.graph || !Array.isArray(d.graph.nodes) || d.graph.nodes.length === 0) {
    throw new Error("architecture export has no graph nodes");
  }
  for (const node of d.graph.nodes) {
    if (!Array.isArray(node.inputs)) {
      throw new Error(`node ${node.id}: corrupted inputs list`);
    }
    for (const i of node.inputs) {
      if (typeof i !== "number" || i < 0 || i >= node.id) {
        throw new Error(`node ${node.id}: input ${String(i)} breaks topological order`);
      }
    }
  }
  if (typeof d.param_count !== "number") {
    throw new Error("architecture export missing param_count");
  }
  return d;
}
