"""Genome encodings and the bijections between them.

Three representations of one architecture:

* DigitGenome -- the canonical unpacked form: one small integer per decision
  point. This is what the evolutionary operators manipulate.
* PackedGenome -- the compact integer-vector form: one (possibly huge) integer
  per structure/pipeline/reduction gene, each gene a mixed-radix composition
  of its digits.
* ArchitecturePlan -- the decoded symbolic architecture.

Digit conventions, fixed for reproducibility:

* mixed-radix digits are little-endian: digit 0 describes layer 0;
* within a digit d, the choice index is the minor component (d mod N) and the
  option index is the major one (d div N);
* the reduction gene is kept as a single digit of irregular radix
  P_r*N_r**L_r + P_r*N_r, since its two-variant structure does not factor
  into uniform digits.
"""
from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass

from .space import BlockOption, SearchConfig, SpaceParams, total_cardinality

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class DigitGenome:
    """Canonical unpacked genome.

    block_digits is indexed [cell][pipeline][layer]. Total digit count is
    L_c + N_c*L_p*L_B + N_c.
    """

    structure_digits: tuple[int, ...]
    block_digits: tuple[tuple[tuple[int, ...], ...], ...]
    reduction_values: tuple[int, ...]


@dataclass(frozen=True)
class PackedGenome:
    """The integer-vector view: genes = [x, x_11..x_1Lp, r_1, ..., r_Nc]."""

    x: int
    cells: tuple[tuple[tuple[int, ...], int], ...]  # per cell: (pipeline genes, reduction gene)

    @property
    def genes(self) -> tuple[int, ...]:
        out = [self.x]
        for pipes, red in self.cells:
            out.extend(pipes)
            out.append(red)
        return tuple(out)


@dataclass(frozen=True)
class ReductionPlan:
    """Reduction part choice: L_r per-branch blocks before the merge, or one
    block after it, plus the merge mode index."""

    variant: str  # "before_merge" | "after_merge"
    merge_mode: int
    blocks: tuple[int, ...]  # L_r indices for before_merge, exactly one for after_merge


@dataclass(frozen=True)
class BlockStep:
    block: int
    option: BlockOption


@dataclass(frozen=True)
class CellPlan:
    pipelines: tuple[tuple[BlockStep, ...], ...]
    reduction: ReductionPlan


@dataclass(frozen=True)
class ArchitecturePlan:
    """Decoded symbolic architecture: layer assignments plus one plan per cell."""

    layers: tuple[tuple[int, int], ...]  # (cell_index, sampling_mode_index)
    cells: tuple[CellPlan, ...]


# ---------------------------------------------------------------------------
# bounds and digit bookkeeping
# ---------------------------------------------------------------------------

def structure_bound(params: SpaceParams) -> int:
    return (params.P_c * params.N_c) ** params.L_c


def pipeline_bound(params: SpaceParams) -> int:
    return (params.P_B * params.N_B) ** params.L_B


def reduction_bound(params: SpaceParams) -> int:
    return params.P_r * params.N_r ** params.L_r + params.P_r * params.N_r


def digit_radixes(params: SpaceParams) -> list[int]:
    """Radix of every digit in canonical order: structure digits, block digits
    by (cell, pipeline, layer), then per-cell reduction values."""
    p = params
    return ([p.P_c * p.N_c] * p.L_c
            + [p.P_B * p.N_B] * (p.N_c * p.L_p * p.L_B)
            + [reduction_bound(p)] * p.N_c)


def packed_bounds(params: SpaceParams) -> list[int]:
    """Exclusive upper bound of every packed gene, in gene order."""
    p = params
    per_cell = [pipeline_bound(p)] * p.L_p + [reduction_bound(p)]
    return [structure_bound(p)] + per_cell * p.N_c


def flatten_digits(genome: DigitGenome) -> list[int]:
    """Digits in canonical order (the serialization and hashing order)."""
    out = list(genome.structure_digits)
    for cell in genome.block_digits:
        for pipe in cell:
            out.extend(pipe)
    out.extend(genome.reduction_values)
    return out


def genome_from_digits(digits, params: SpaceParams) -> DigitGenome:
    """Rebuild a DigitGenome from its canonical flat digit list."""
    p = params
    expected = p.L_c + p.N_c * p.L_p * p.L_B + p.N_c
    digits = list(digits)
    if len(digits) != expected:
        raise ValueError(f"expected {expected} digits, got {len(digits)}")
    structure = tuple(digits[:p.L_c])
    pos = p.L_c
    cells = []
    for _ in range(p.N_c):
        pipes = []
        for _ in range(p.L_p):
            pipes.append(tuple(digits[pos:pos + p.L_B]))
            pos += p.L_B
        cells.append(tuple(pipes))
    reductions = tuple(digits[pos:])
    return DigitGenome(structure, tuple(cells), reductions)


def validate_genome(genome: DigitGenome, params: SpaceParams) -> None:
    """Raise ValueError if any digit is outside its radix."""
    digits = flatten_digits(genome)
    for i, (d, radix) in enumerate(zip(digits, digit_radixes(params))):
        if not 0 <= d < radix:
            raise ValueError(f"digit {i} out of range: {d} not in [0, {radix})")


# ---------------------------------------------------------------------------
# mixed-radix gene decoding
# ---------------------------------------------------------------------------

def _le_digits(value: int, base: int, count: int) -> list[int]:
    out = []
    for _ in range(count):
        out.append(value % base)
        value //= base
    return out


def _le_compose(digits, base: int) -> int:
    value = 0
    for d in reversed(list(digits)):
        value = value * base + d
    return value


def decode_structure_gene(x: int, params: SpaceParams) -> list[tuple[int, int]]:
    """Split a structure gene into per-layer (cell_index, sampling_mode_index).

    Little-endian base P_c*N_c; within a digit the cell index is minor and the
    sampling mode major.
    """
    bound = structure_bound(params)
    if not 0 <= x < bound:
        raise ValueError(f"structure gene out of range: {x} not in [0, {bound})")
    return [(d % params.N_c, d // params.N_c)
            for d in _le_digits(x, params.P_c * params.N_c, params.L_c)]


def decode_pipeline_gene(x: int, params: SpaceParams) -> list[tuple[int, int]]:
    """Split a pipeline gene into per-layer (block_index, option_index)."""
    bound = pipeline_bound(params)
    if not 0 <= x < bound:
        raise ValueError(f"pipeline gene out of range: {x} not in [0, {bound})")
    return [(d % params.N_B, d // params.N_B)
            for d in _le_digits(x, params.P_B * params.N_B, params.L_B)]


def decode_reduction_gene(r: int, params: SpaceParams) -> ReductionPlan:
    """Decode a reduction gene.

    Values below P_r*N_r**L_r select the before-merge variant (merge mode is
    the major component, the L_r branch blocks are the little-endian base-N_r
    digits of the remainder); the rest select the after-merge variant with a
    single block.
    """
    bound = reduction_bound(params)
    if not 0 <= r < bound:
        raise ValueError(f"reduction gene out of range: {r} not in [0, {bound})")
    before = params.P_r * params.N_r ** params.L_r
    if r < before:
        span = params.N_r ** params.L_r
        return ReductionPlan("before_merge", r // span,
                             tuple(_le_digits(r % span, params.N_r, params.L_r)))
    r -= before
    return ReductionPlan("after_merge", r // params.N_r, (r % params.N_r,))


def _encode_reduction(plan: ReductionPlan, params: SpaceParams) -> int:
    span = params.N_r ** params.L_r
    if plan.variant == "before_merge":
        return plan.merge_mode * span + _le_compose(plan.blocks, params.N_r)
    return params.P_r * span + plan.merge_mode * params.N_r + plan.blocks[0]


# ---------------------------------------------------------------------------
# pack / unpack
# ---------------------------------------------------------------------------

def pack(genome: DigitGenome, params: SpaceParams) -> PackedGenome:
    """Compose digit groups into the packed gene vector (little-endian)."""
    validate_genome(genome, params)
    x = _le_compose(genome.structure_digits, params.P_c * params.N_c)
    cells = []
    for cell_digits, red in zip(genome.block_digits, genome.reduction_values):
        pipes = tuple(_le_compose(pipe, params.P_B * params.N_B) for pipe in cell_digits)
        cells.append((pipes, red))
    return PackedGenome(x, tuple(cells))


def unpack(packed: PackedGenome, params: SpaceParams) -> DigitGenome:
    """Split packed genes back into digits. Inverse of pack."""
    bound = structure_bound(params)
    if not 0 <= packed.x < bound:
        raise ValueError(f"structure gene out of range: {packed.x} not in [0, {bound})")
    if len(packed.cells) != params.N_c:
        raise ValueError(f"expected {params.N_c} cell gene groups, got {len(packed.cells)}")
    structure = tuple(_le_digits(packed.x, params.P_c * params.N_c, params.L_c))
    pipe_bound, red_bound = pipeline_bound(params), reduction_bound(params)
    cells, reductions = [], []
    for pipes, red in packed.cells:
        if len(pipes) != params.L_p:
            raise ValueError(f"expected {params.L_p} pipeline genes, got {len(pipes)}")
        for g in pipes:
            if not 0 <= g < pipe_bound:
                raise ValueError(f"pipeline gene out of range: {g} not in [0, {pipe_bound})")
        if not 0 <= red < red_bound:
            raise ValueError(f"reduction gene out of range: {red} not in [0, {red_bound})")
        cells.append(tuple(tuple(_le_digits(g, params.P_B * params.N_B, params.L_B))
                           for g in pipes))
        reductions.append(red)
    return DigitGenome(structure, tuple(cells), tuple(reductions))


def packed_from_genes(genes, params: SpaceParams) -> PackedGenome:
    """Rebuild a PackedGenome from its flat gene list [x, x_11.., r_1, ...]."""
    genes = list(genes)
    expected = 1 + params.N_c * (params.L_p + 1)
    if len(genes) != expected:
        raise ValueError(f"expected {expected} genes, got {len(genes)}")
    cells = []
    pos = 1
    for _ in range(params.N_c):
        pipes = tuple(genes[pos:pos + params.L_p])
        pos += params.L_p
        cells.append((pipes, genes[pos]))
        pos += 1
    return PackedGenome(genes[0], tuple(cells))


# ---------------------------------------------------------------------------
# decode to an architecture plan
# ---------------------------------------------------------------------------

def decode(genome: DigitGenome, config: SearchConfig) -> ArchitecturePlan:
    """Decode a genome into a symbolic plan.

    Total on its domain: every in-range genome yields a structurally valid
    plan, so the search never needs rejection sampling.
    """
    p = config.params
    validate_genome(genome, p)
    layers = tuple((d % p.N_c, d // p.N_c) for d in genome.structure_digits)
    cells = []
    for cell_digits, red in zip(genome.block_digits, genome.reduction_values):
        pipelines = tuple(
            tuple(BlockStep(d % p.N_B, config.block_options[d // p.N_B]) for d in pipe)
            for pipe in cell_digits)
        cells.append(CellPlan(pipelines, decode_reduction_gene(red, p)))
    return ArchitecturePlan(layers, tuple(cells))


# ---------------------------------------------------------------------------
# sampling, hashing, serialization
# ---------------------------------------------------------------------------

def random_genome_from(rng: random.Random, params: SpaceParams) -> DigitGenome:
    """Draw each digit uniformly from its radix, in canonical order, using
    rng.randrange. One shared generator keeps whole-run sequences reproducible."""
    return genome_from_digits([rng.randrange(r) for r in digit_radixes(params)], params)


def random_genome(seed: int, params: SpaceParams) -> DigitGenome:
    """Uniform random genome from a fresh Mersenne-Twister stream seeded with
    `seed`. Same seed and params always reproduce the same genome."""
    return random_genome_from(random.Random(seed), params)


def enumerate_genomes(params: SpaceParams, limit: int = 100000):
    """Yield every genome of the space in lexicographic digit order.

    Refuses spaces larger than `limit` (this is a testing/brute-force tool).
    """
    total = total_cardinality(params)
    if total > limit:
        raise ValueError(f"space has {total} genomes, above the enumeration limit {limit}")
    radixes = digit_radixes(params)
    digits = [0] * len(radixes)
    while True:
        yield genome_from_digits(digits, params)
        for i in range(len(digits) - 1, -1, -1):
            digits[i] += 1
            if digits[i] < radixes[i]:
                break
            digits[i] = 0
        else:
            return


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash."""
    h = FNV64_OFFSET
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _U64
    return h


def digits_hash(digits) -> int:
    """FNV-1a 64 over a digit sequence serialized as 4-byte big-endian words."""
    digits = list(digits)
    return fnv1a64(struct.pack(f">{len(digits)}I", *digits) if digits else b"")


def genome_hash(genome: DigitGenome) -> int:
    """FNV-1a 64 over the canonical byte form: every digit as a 4-byte
    big-endian unsigned integer, in canonical digit order."""
    return digits_hash(flatten_digits(genome))


def genome_to_json(genome: DigitGenome, params: SpaceParams | None = None) -> str:
    """Serialize as {"digits": [...]}; adds "packed" decimal strings when
    params are supplied."""
    obj: dict = {"digits": flatten_digits(genome)}
    if params is not None:
        obj["packed"] = [str(g) for g in pack(genome, params).genes]
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def genome_from_json(text: str, params: SpaceParams) -> DigitGenome:
    """Parse either serialized form; "digits" wins when both are present."""
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("genome JSON must be an object")
    if "digits" in obj:
        genome = genome_from_digits([int(d) for d in obj["digits"]], params)
    elif "packed" in obj:
        genome = unpack(packed_from_genes([int(g) for g in obj["packed"]], params), params)
    else:
        raise ValueError("genome JSON needs a 'digits' or 'packed' field")
    validate_genome(genome, params)
    return genome
