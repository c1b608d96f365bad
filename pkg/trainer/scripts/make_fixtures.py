#!/usr/bin/env python3
"""Regenerate the trainer test fixtures through the cellspace public API.

Run from trainer/: python3 scripts/make_fixtures.py
"""

import pathlib
import random

from cellspace.artifacts import canonical_json, export_architecture
from cellspace.genome import decode, genome_from_digits, random_genome_from
from cellspace.graph import build_graph
from cellspace.space import config_from_dict, config_to_dict, default_config, tiny_config

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "test" / "fixtures"


def export_of(genome, cfg):
    return export_architecture(genome, build_graph(decode(genome, cfg), cfg), cfg)


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    # 20 sampled full-size architectures for the parameter-parity suite
    cfg = default_config()
    rng = random.Random(100)
    for i in range(20):
        genome = random_genome_from(rng, cfg.params)
        path = FIXTURES / f"arch_default_{i:02d}.json"
        path.write_text(canonical_json(export_of(genome, cfg)) + "\n", encoding="utf-8")

    # identity-cell architecture: skip blocks + identity reduction, same mode
    tiny = config_to_dict(tiny_config())
    tiny["reduction_blocks"] = [{"kind": "identity"}]
    identity_cfg = config_from_dict(tiny)
    genome = genome_from_digits([0, 0, 0, 0], identity_cfg.params)
    (FIXTURES / "arch_identity_cell.json").write_text(
        canonical_json(export_of(genome, identity_cfg)) + "\n", encoding="utf-8")

    # recorded protocol requests: three tiny architectures at epochs 0
    cfg = tiny_config()
    rng = random.Random(7)
    lines = []
    for i in range(3):
        genome = random_genome_from(rng, cfg.params)
        export = export_of(genome, cfg)
        request = {
            "id": i,
            "genome": export["genome"]["digits"],
            "architecture": export,
            "budget": {"epochs": 0, "batch_size": 128, "dropout": 0.7},
        }
        lines.append(canonical_json(request))
    (FIXTURES / "requests.ndjson").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
