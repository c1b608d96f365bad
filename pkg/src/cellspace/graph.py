"""Concrete operation DAGs: plan -> stem -> cells -> head, with shape inference.

Shape and channel rules, applied uniformly so that every in-range genome
builds without rejection:

* conv-part operations run stride 1, padded, and channel-preserving (conv
  filters = input channels); all channel changes happen at cell boundaries;
* reduction blocks take stride 2 under down sampling and stride 1 under same;
  under up sampling a 2x nearest-neighbor upsample precedes each of them;
* an identity reduction block under down sampling is coerced to maxpool 3x3
  stride 2, since an identity cannot halve spatial dims;
* after the merge (and the after-merge reduction block, if that variant) a
  1x1 projection conv is appended whenever the channel count differs from the
  cell's target: 2*C_in (down), C_in (same), max(1, C_in div 2) (up);
* spatial halving is the padded-stride-2 ceiling rule: (h, w) ->
  (ceil(h/2), ceil(w/2)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .genome import ArchitecturePlan, CellPlan
from .space import CONV_KINDS, HeadLayer, Operation, SearchConfig

MERGE_OPS = frozenset({"merge_add", "merge_concat"})
PARAM_FREE_OPS = frozenset({"input", "maxpool", "identity", "relu", "merge_add",
                            "merge_concat", "upsample2x", "flatten", "dropout",
                            "softmax"})


class GraphError(RuntimeError):
    """Internal consistency failure (e.g. shape mismatch at an add merge).

    Unreachable for in-range genomes; raised only when a graph was constructed
    outside the builder's rules.
    """


@dataclass(frozen=True)
class TensorShape:
    h: int
    w: int
    c: int

    def __post_init__(self):
        if self.h < 1 or self.w < 1 or self.c < 1:
            raise GraphError(f"degenerate tensor shape {self}")


@dataclass
class ArchNode:
    id: int
    op: str
    attrs: dict
    inputs: tuple[int, ...]
    out_shape: TensorShape | None = None


@dataclass
class ArchGraph:
    """Operation DAG in topological order (construction order).

    cell_spans records, per cell layer, (entry node id, exit node id,
    sampling_mode_index) so the per-cell shape contract can be checked from
    the outside.
    """

    nodes: list[ArchNode] = field(default_factory=list)
    input_id: int = 0
    output_id: int = 0
    cell_spans: list[tuple[int, int, int]] = field(default_factory=list)

    def node(self, node_id: int) -> ArchNode:
        return self.nodes[node_id]

    def add(self, op: str, attrs: dict | None = None, inputs: tuple[int, ...] = ()) -> int:
        node = ArchNode(len(self.nodes), op, attrs or {}, tuple(inputs))
        node.out_shape = _node_shape(node, [self.nodes[i].out_shape for i in inputs])
        self.nodes.append(node)
        return node.id

    def shape(self, node_id: int) -> TensorShape:
        shape = self.nodes[node_id].out_shape
        if shape is None:
            raise GraphError(f"node {node_id} has no inferred shape")
        return shape


def _halve(v: int) -> int:
    return (v + 1) // 2  # padded stride-2: ceil(v/2)


def _node_shape(node: ArchNode, in_shapes: list[TensorShape]) -> TensorShape:
    op, attrs = node.op, node.attrs
    if op == "input":
        h, w, c = attrs["shape"]
        return TensorShape(h, w, c)
    s = in_shapes[0]
    if op in ("stem_conv", "conv2d", "depthwise_sep_conv2d", "projection_conv1x1"):
        stride = attrs.get("stride", 1)
        h, w = (s.h, s.w) if stride == 1 else (_halve(s.h), _halve(s.w))
        return TensorShape(h, w, attrs["filters"])
    if op == "maxpool":
        stride = attrs.get("stride", 1)
        h, w = (s.h, s.w) if stride == 1 else (_halve(s.h), _halve(s.w))
        return TensorShape(h, w, s.c)
    if op in ("identity", "batch_norm", "relu", "dropout", "softmax"):
        return s
    if op == "upsample2x":
        return TensorShape(2 * s.h, 2 * s.w, s.c)
    if op == "merge_add":
        for other in in_shapes[1:]:
            if other != s:
                raise GraphError(f"add merge with mismatched shapes {s} vs {other}")
        return s
    if op == "merge_concat":
        for other in in_shapes[1:]:
            if (other.h, other.w) != (s.h, s.w):
                raise GraphError(f"concat merge with mismatched spatial dims {s} vs {other}")
        return TensorShape(s.h, s.w, sum(t.c for t in in_shapes))
    if op == "flatten":
        return TensorShape(1, 1, s.h * s.w * s.c)
    if op == "dense":
        return TensorShape(1, 1, attrs["units"])
    raise GraphError(f"unknown op {op!r}")


def infer_shapes(graph: ArchGraph) -> ArchGraph:
    """Recompute every node's out_shape from the input node forward.

    Also serves as the structural validator: raises GraphError on merge rule
    violations or malformed wiring.
    """
    for node in graph.nodes:
        if node.op == "input":
            if node.inputs:
                raise GraphError("input node must have no inputs")
        elif node.op in MERGE_OPS:
            if len(node.inputs) < 2:
                raise GraphError(f"{node.op} node needs >= 2 inputs")
        elif len(node.inputs) != 1:
            raise GraphError(f"{node.op} node needs exactly 1 input")
        for i in node.inputs:
            if i >= node.id:
                raise GraphError(f"node {node.id} not in topological order")
        node.out_shape = _node_shape(node, [graph.nodes[i].out_shape for i in node.inputs])
    return graph


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _add_operation(graph: ArchGraph, op: Operation, prev: int, stride: int = 1) -> int:
    if op.kind == "identity":
        return graph.add("identity", inputs=(prev,))
    if op.kind == "maxpool":
        return graph.add("maxpool", {"kernel": op.kernel, "stride": stride}, (prev,))
    # conv kinds stay channel-preserving; the 1x1 projection at the cell
    # boundary owns all channel changes
    filters = graph.shape(prev).c
    return graph.add(op.kind, {"kernel": op.kernel, "stride": stride, "filters": filters},
                     (prev,))


def _add_block(graph: ArchGraph, block_op: Operation, option, prev: int) -> int:
    if option.skip:
        return graph.add("identity", inputs=(prev,))
    if option.activation == "relu_before":
        prev = graph.add("relu", inputs=(prev,))
    prev = _add_operation(graph, block_op, prev)
    if option.batch_norm:
        prev = graph.add("batch_norm", inputs=(prev,))
    if option.activation == "relu_after":
        prev = graph.add("relu", inputs=(prev,))
    return prev


def _add_reduction_block(graph: ArchGraph, op: Operation, mode: str, prev: int) -> int:
    if mode == "up":
        prev = graph.add("upsample2x", inputs=(prev,))
    if mode == "down":
        if op.kind == "identity":
            op = Operation("maxpool", 3)  # identity cannot halve spatial dims
        return _add_operation(graph, op, prev, stride=2)
    return _add_operation(graph, op, prev, stride=1)


def _merge(graph: ArchGraph, merge_mode: str, inputs: list[int]) -> int:
    if len(inputs) == 1:  # single branch: merging is a no-op
        return inputs[0]
    op = "merge_add" if merge_mode == "add" else "merge_concat"
    return graph.add(op, inputs=tuple(inputs))


def _build_cell(graph: ArchGraph, cell: CellPlan, mode: str, config: SearchConfig,
                entry: int) -> int:
    c_in = graph.shape(entry).c
    if mode == "down":
        c_target = 2 * c_in
    elif mode == "up":
        c_target = max(1, c_in // 2)
    else:
        c_target = c_in

    exits = []
    for pipeline in cell.pipelines:
        prev = entry
        for step in pipeline:
            prev = _add_block(graph, config.blocks[step.block].op, step.option, prev)
        exits.append(prev)

    red = cell.reduction
    merge_mode = config.merge_modes[red.merge_mode]
    if red.variant == "before_merge":
        # one block per pipeline branch; under an explicitly allowed L_r != L_p
        # mismatch the L_r choices are assigned cyclically so no branch is lost
        branches = [_add_reduction_block(graph,
                                         config.reduction_blocks[red.blocks[k % len(red.blocks)]],
                                         mode, prev)
                    for k, prev in enumerate(exits)]
        out = _merge(graph, merge_mode, branches)
    else:
        merged = _merge(graph, merge_mode, exits)
        out = _add_reduction_block(graph, config.reduction_blocks[red.blocks[0]], mode, merged)

    if graph.shape(out).c != c_target:
        out = graph.add("projection_conv1x1",
                        {"kernel": 1, "stride": 1, "filters": c_target}, (out,))
    return out


def attach_head(graph: ArchGraph, head: tuple[HeadLayer, ...]) -> ArchGraph:
    """Append flatten + the configured classifier layers to the current output."""
    if not head:
        raise ValueError("head spec is empty")
    prev = graph.add("flatten", inputs=(graph.output_id,))
    for layer in head:
        if layer.type == "dense":
            prev = graph.add("dense", {"units": layer.units}, (prev,))
            if layer.activation == "relu":
                prev = graph.add("relu", inputs=(prev,))
            elif layer.activation == "softmax":
                prev = graph.add("softmax", inputs=(prev,))
        else:
            prev = graph.add("dropout", {"rate": layer.rate}, (prev,))
    graph.output_id = prev
    return graph


def build_graph(plan: ArchitecturePlan, config: SearchConfig,
                with_head: bool = True) -> ArchGraph:
    """Instantiate a plan: input -> stem conv -> L_c cell layers -> head.

    Deterministic; node count is a function of the plan alone. The returned
    graph has all shapes inferred and validated.
    """
    graph = ArchGraph()
    graph.input_id = graph.add("input", {"shape": tuple(config.input_shape)})
    prev = graph.add("stem_conv",
                     {"kernel": 3, "stride": 1, "filters": config.stem_filters},
                     (graph.input_id,))
    for cell_index, mode_index in plan.layers:
        mode = config.sampling_modes[mode_index]
        entry = prev
        prev = _build_cell(graph, plan.cells[cell_index], mode, config, entry)
        graph.cell_spans.append((entry, prev, mode_index))
    graph.output_id = prev
    if with_head:
        attach_head(graph, config.head)
    return infer_shapes(graph)
