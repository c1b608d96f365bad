"""Analytic trainable-parameter counts and the objective/constraint vector.

Counting conventions, which any external trainer must mirror exactly:
all conv and dense layers carry bias terms; depthwise-separable convs have a
bias on the pointwise stage only; batch-norm contributes its 2*c trainable
scale/shift (moving statistics are non-trainable and excluded).
"""
from __future__ import annotations

from dataclasses import dataclass

from .graph import ArchGraph, ArchNode, PARAM_FREE_OPS, TensorShape


@dataclass(frozen=True)
class ObjectiveVector:
    """Minimization objectives: f1 = 1 - accuracy, f2 = params / budget, and
    the feasibility constraint g = f2 - 1 (feasible iff g <= 0)."""

    f1: float
    f2: float
    g: float

    @property
    def feasible(self) -> bool:
        return self.g <= 0.0


def node_param_count(node: ArchNode, in_shape: TensorShape | None) -> int:
    """Trainable parameters of one node given its input shape."""
    if node.op in PARAM_FREE_OPS:
        return 0
    if node.out_shape is None or (in_shape is None and node.op != "input"):
        raise ValueError(f"node {node.id}: shapes not inferred")
    if node.op in ("conv2d", "stem_conv", "projection_conv1x1"):
        k = node.attrs["kernel"]
        return k * k * in_shape.c * node.out_shape.c + node.out_shape.c
    if node.op == "depthwise_sep_conv2d":
        k = node.attrs["kernel"]
        return k * k * in_shape.c + in_shape.c * node.out_shape.c + node.out_shape.c
    if node.op == "dense":
        n_in = in_shape.h * in_shape.w * in_shape.c
        return n_in * node.attrs["units"] + node.attrs["units"]
    if node.op == "batch_norm":
        return 2 * node.out_shape.c
    raise ValueError(f"unknown op {node.op!r}")


def param_breakdown(graph: ArchGraph) -> list[tuple[ArchNode, int]]:
    """Per-node parameter counts in topological order."""
    out = []
    for node in graph.nodes:
        in_shape = graph.shape(node.inputs[0]) if node.inputs else None
        out.append((node, node_param_count(node, in_shape)))
    return out


def total_param_count(graph: ArchGraph) -> int:
    """Exact trainable-parameter total of the whole graph."""
    return sum(count for _, count in param_breakdown(graph))


def objective_vector(f1_raw: float, graph: ArchGraph, total_param: int) -> ObjectiveVector:
    """Assemble the objective vector from a raw error value and the graph."""
    if total_param <= 0:
        raise ValueError(f"total_param must be > 0, got {total_param}")
    f2 = total_param_count(graph) / total_param
    return ObjectiveVector(f1=f1_raw, f2=f2, g=f2 - 1.0)
