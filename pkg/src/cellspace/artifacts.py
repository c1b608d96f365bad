"""Export formats: architecture JSON, Pareto CSV/JSON, and front plots.

Every export is a deterministic function of its input. JSON is rendered in
one canonical form (sorted keys, no insignificant whitespace) so identical
inputs produce byte-identical files; the SVG plot is hand-assembled for the
same reason. A raster PNG of the front is rendered alongside via matplotlib
for quick visual inspection.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from typing import TYPE_CHECKING

from .genome import (DigitGenome, flatten_digits, fnv1a64, genome_from_digits,
                     pack, packed_from_genes, unpack)
from .graph import ArchGraph, build_graph
from .metrics import total_param_count
from .space import SearchConfig, config_to_dict

if TYPE_CHECKING:
    from .evolve import ParetoArchive

log = logging.getLogger("cellspace.artifacts")

FORMAT_VERSION = "1"

SVG_WIDTH, SVG_HEIGHT = 800, 600
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 25, 20, 55


def canonical_json(obj) -> str:
    """The one JSON form used everywhere: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_fingerprint(config: SearchConfig) -> str:
    """64-bit FNV-1a over the normalized config, as 16 hex digits."""
    return format(fnv1a64(canonical_json(config_to_dict(config)).encode()), "016x")


def export_architecture(genome: DigitGenome, graph: ArchGraph,
                        config: SearchConfig) -> dict:
    """Self-contained architecture description for external consumers."""
    packed = pack(genome, config.params)
    return {
        "format_version": FORMAT_VERSION,
        "genome": {"digits": flatten_digits(genome),
                   "packed": [str(g) for g in packed.genes]},
        "graph": {
            "nodes": [{"id": n.id, "op": n.op,
                       "attrs": {k: list(v) if isinstance(v, tuple) else v
                                 for k, v in n.attrs.items()},
                       "inputs": list(n.inputs),
                       "out_shape": [n.out_shape.h, n.out_shape.w, n.out_shape.c]}
                      for n in graph.nodes],
            "input_id": graph.input_id,
            "output_id": graph.output_id,
        },
        "param_count": total_param_count(graph),
        "config_fingerprint": config_fingerprint(config),
    }


def export_genome(genome: DigitGenome, config: SearchConfig) -> dict:
    """Build graph and export in one step."""
    from .genome import decode
    return export_architecture(genome, build_graph(decode(genome, config), config), config)


def packed_string(genome: DigitGenome, config: SearchConfig) -> str:
    """Comma-joined decimal packed genes, the textual genome form used in CSV
    output and accepted by the CLI."""
    return ",".join(str(g) for g in pack(genome, config.params).genes)


def parse_genome_text(text: str, params) -> DigitGenome:
    """Parse a genome given as JSON ({"digits": ...} / {"packed": ...}) or as
    comma-separated packed decimal genes."""
    from .genome import genome_from_json, validate_genome
    text = text.strip()
    if text.startswith("{"):
        return genome_from_json(text, params)
    genes = [int(part) for part in text.split(",")]
    genome = unpack(packed_from_genes(genes, params), params)
    validate_genome(genome, params)
    return genome


# ---------------------------------------------------------------------------
# Pareto front exports
# ---------------------------------------------------------------------------

def export_pareto_csv(archive: "ParetoArchive", config: SearchConfig) -> str:
    """CSV of the front: genome_packed, f1, f2, g, param_count, sorted by f1."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["genome_packed", "f1", "f2", "g", "param_count"])
    for e in archive.sorted_entries():
        writer.writerow([packed_string(e.genome, config),
                         repr(e.objectives.f1), repr(e.objectives.f2),
                         repr(e.objectives.g), e.param_count])
    return buf.getvalue()


def export_pareto_json(archive: "ParetoArchive", config: SearchConfig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config_fingerprint": config_fingerprint(config),
        "entries": [{
            "genome": {"digits": flatten_digits(e.genome),
                       "packed": [str(g) for g in pack(e.genome, config.params).genes]},
            "f1": e.objectives.f1,
            "f2": e.objectives.f2,
            "g": e.objectives.g,
            "param_count": e.param_count,
        } for e in archive.sorted_entries()],
    }


def pareto_archive_from_json(obj: dict, config: SearchConfig) -> "ParetoArchive":
    """Rebuild an archive from its JSON export."""
    from .evolve import Individual, ParetoArchive
    from .metrics import ObjectiveVector
    archive = ParetoArchive()
    for entry in obj["entries"]:
        genome = genome_from_digits([int(d) for d in entry["genome"]["digits"]],
                                    config.params)
        vec = ObjectiveVector(float(entry["f1"]), float(entry["f2"]), float(entry["g"]))
        archive.add(Individual(genome, vec, int(entry["param_count"])))
    return archive


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def _affine(value, lo, hi, px_lo, px_hi):
    return px_lo + (value - lo) / (hi - lo) * (px_hi - px_lo)


def render_pareto_svg(archive: "ParetoArchive") -> str:
    """Scatter of the front (f2 on x, f1 on y) as a standalone 800x600 SVG.

    Deterministic for a given archive; an empty archive still renders axes.
    """
    entries = archive.sorted_entries()
    x_max = max([1.0] + [e.objectives.f2 for e in entries])
    y_max = 1.0
    px0, px1 = _MARGIN_L, SVG_WIDTH - _MARGIN_R
    py0, py1 = SVG_HEIGHT - _MARGIN_B, _MARGIN_T  # y axis points up

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
    ]
    for i in range(5):
        frac = i / 4
        tx = _affine(frac * x_max, 0, x_max, px0, px1)
        ty = _affine(frac * y_max, 0, y_max, py0, py1)
        parts.append(f'<line x1="{tx:.2f}" y1="{py0}" x2="{tx:.2f}" y2="{py0 + 5}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{tx:.2f}" y="{py0 + 20}" font-size="12" '
                     f'text-anchor="middle">{frac * x_max:.2f}</text>')
        parts.append(f'<line x1="{px0 - 5}" y1="{ty:.2f}" x2="{px0}" y2="{ty:.2f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{px0 - 8}" y="{ty + 4:.2f}" font-size="12" '
                     f'text-anchor="end">{frac * y_max:.2f}</text>')
    parts.append(f'<text x="{(px0 + px1) / 2:.2f}" y="{SVG_HEIGHT - 12}" font-size="14" '
                 f'text-anchor="middle">params / TotalParam</text>')
    parts.append(f'<text x="18" y="{(py0 + py1) / 2:.2f}" font-size="14" '
                 f'text-anchor="middle" transform="rotate(-90 18 {(py0 + py1) / 2:.2f})">'
                 f'1 - accuracy</text>')
    for e in entries:
        cx = _affine(e.objectives.f2, 0, x_max, px0, px1)
        cy = _affine(e.objectives.f1, 0, y_max, py0, py1)
        fill = "#1f77b4" if e.objectives.feasible else "#d62728"
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="{fill}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_pareto_png(archive: "ParetoArchive", path) -> None:
    """Matplotlib rendering of the same scatter, written to `path`."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 6))
    feasible = [e for e in archive.entries if e.objectives.feasible]
    infeasible = [e for e in archive.entries if not e.objectives.feasible]
    if feasible:
        ax.scatter([e.objectives.f2 for e in feasible],
                   [e.objectives.f1 for e in feasible],
                   c="tab:blue", label="feasible")
    if infeasible:
        ax.scatter([e.objectives.f2 for e in infeasible],
                   [e.objectives.f1 for e in infeasible],
                   c="tab:red", marker="x", label="infeasible")
    ax.set_xlabel("params / TotalParam")
    ax.set_ylabel("1 - accuracy")
    ax.set_title("Pareto front")
    if feasible or infeasible:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plan_summary(plan, config: SearchConfig) -> str:
    """Compact rendering of the symbolic plan: layer assignments, then each
    cell's pipelines and reduction."""
    lines = []
    for layer_index, (cell, mode) in enumerate(plan.layers):
        lines.append(f"layer {layer_index}: cell {cell}, "
                     f"{config.sampling_modes[mode]}-sampling")
    for cell_index, cell in enumerate(plan.cells):
        lines.append(f"cell {cell_index}:")
        for pipe_index, pipe in enumerate(cell.pipelines):
            steps = []
            for step in pipe:
                if step.option.skip:
                    steps.append("skip")
                    continue
                tags = [config.blocks[step.block].name]
                if step.option.batch_norm:
                    tags.append("bn")
                if step.option.activation != "none":
                    tags.append(step.option.activation)
                steps.append("+".join(tags))
            lines.append(f"  pipeline {pipe_index}: " + " -> ".join(steps))
        red = cell.reduction
        blocks = [config.reduction_blocks[b].kind for b in red.blocks]
        lines.append(f"  reduction: {red.variant} "
                     f"[{', '.join(blocks)}] merge={config.merge_modes[red.merge_mode]}")
    return "\n".join(lines)


def summary_table(graph: ArchGraph) -> str:
    """Human-readable per-node listing with shapes and parameter counts."""
    from .metrics import param_breakdown
    rows = [("id", "op", "attrs", "inputs", "out_shape", "params")]
    total = 0
    for node, count in param_breakdown(graph):
        total += count
        attrs = ",".join(f"{k}={v}" for k, v in sorted(node.attrs.items())
                         if k != "shape")
        shape = f"{node.out_shape.h}x{node.out_shape.w}x{node.out_shape.c}"
        rows.append((str(node.id), node.op, attrs,
                     ",".join(map(str, node.inputs)), shape, str(count)))
    widths = [max(len(r[c]) for r in rows) for c in range(6)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    lines.append(f"total trainable parameters: {total}")
    return "\n".join(lines)
