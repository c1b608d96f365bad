"""Declarative search-space definition, validation, and exact cardinalities.

The search space is a hierarchy: a stack of L_c cell layers, each layer
picking one of N_c cells under one of P_c sampling modes; a cell holds L_p
parallel pipelines of L_B blocks plus a reduction part that merges the
pipelines. Everything the space can express is driven by a single JSON
config file; all derived counts come from catalog list lengths, never from
free-standing numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

CONV_KINDS = frozenset({"conv2d", "depthwise_sep_conv2d"})
OP_KINDS = CONV_KINDS | {"maxpool", "identity"}
ACTIVATIONS = frozenset({"none", "relu_before", "relu_after"})
MERGE_MODES = frozenset({"add", "concat"})
SAMPLING_MODES = frozenset({"same", "down", "up"})
HEAD_ACTIVATIONS = frozenset({"none", "relu", "softmax"})
EA_MODES = frozenset({"digit", "packed"})
EA_STRATEGIES = frozenset({"single_loop", "two_phase"})


class ConfigError(ValueError):
    """Config parse/validation failure; the message names the offending key."""


@dataclass(frozen=True)
class Operation:
    """One searchable operation. Conv-part instances run stride 1 with padding."""

    kind: str
    kernel: int = 1

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ConfigError(f"kind: unknown operation kind {self.kind!r}")
        # identity carries no kernel; normalize so equality/fingerprints are stable
        if self.kind == "identity" and self.kernel != 1:
            object.__setattr__(self, "kernel", 1)
        if self.kernel < 1:
            raise ConfigError(f"kernel: must be >= 1, got {self.kernel}")


@dataclass(frozen=True)
class BlockDef:
    name: str
    op: Operation


@dataclass(frozen=True)
class BlockOption:
    """Block configuration: skip it entirely, or dress the operation with
    batch-norm and/or a ReLU placed before or after it. A skipped block is a
    pure identity, so skip=True forces batch_norm=False and activation='none'.
    """

    skip: bool = False
    batch_norm: bool = False
    activation: str = "none"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation: unknown tag {self.activation!r}")
        if self.skip and (self.batch_norm or self.activation != "none"):
            object.__setattr__(self, "batch_norm", False)
            object.__setattr__(self, "activation", "none")


@dataclass(frozen=True)
class HeadLayer:
    """Classifier head entry: a dense layer (units + activation) or a dropout."""

    type: str
    units: int = 0
    activation: str = "none"
    rate: float = 0.0


@dataclass(frozen=True)
class EAParams:
    """Evolutionary search knobs. Defaults follow the shipped search recipe:
    population 20, 1000 generations, SBX and polynomial mutation both at
    probability 1 with distribution index 3.
    """

    population: int = 20
    generations: int = 1000
    seed: int = 0
    crossover_prob: float = 1.0
    crossover_eta: float = 3.0
    mutation_prob: float = 1.0
    mutation_eta: float = 3.0
    mode: str = "digit"
    strategy: str = "single_loop"
    inner_population: int = 8
    inner_generations: int = 20

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ConfigError(f"ea.population: must be even and >= 4, got {self.population}")
        if self.generations < 0:
            raise ConfigError(f"ea.generations: must be >= 0, got {self.generations}")
        for key in ("crossover_prob", "mutation_prob"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"ea.{key}: must be in [0, 1], got {v}")
        for key in ("crossover_eta", "mutation_eta"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"ea.{key}: must be > 0")
        if self.mode not in EA_MODES:
            raise ConfigError(f"ea.mode: unknown tag {self.mode!r}")
        if self.strategy not in EA_STRATEGIES:
            raise ConfigError(f"ea.strategy: unknown tag {self.strategy!r}")
        if self.inner_population < 4 or self.inner_population % 2:
            raise ConfigError(f"ea.inner_population: must be even and >= 4")
        if self.inner_generations < 0:
            raise ConfigError(f"ea.inner_generations: must be >= 0")


@dataclass(frozen=True)
class SpaceParams:
    """All level counts of the hierarchy. The P_*/N_* counts are derived from
    catalog list lengths by load_config and are never free parameters.
    """

    L_c: int  # cell layers in the stack
    N_c: int  # distinct cells
    P_c: int  # sampling modes
    L_p: int  # pipelines per cell
    L_B: int  # block layers per pipeline
    N_B: int  # block catalog size
    P_B: int  # block option catalog size
    L_r: int  # reduction block layers before the merge
    N_r: int  # reduction block catalog size
    P_r: int  # merge modes

    def __post_init__(self):
        for key, v in self.__dict__.items():
            if v < 1:
                raise ConfigError(f"{key}: must be >= 1, got {v}")


@dataclass(frozen=True)
class SearchConfig:
    """A fully validated search-space instance. Immutable after load; safe to
    share across threads."""

    params: SpaceParams
    blocks: tuple[BlockDef, ...]
    block_options: tuple[BlockOption, ...]
    reduction_blocks: tuple[Operation, ...]
    merge_modes: tuple[str, ...]
    sampling_modes: tuple[str, ...]
    input_shape: tuple[int, int, int]
    stem_filters: int
    head: tuple[HeadLayer, ...]
    total_param: int
    ea: EAParams = field(default_factory=EAParams)


# ---------------------------------------------------------------------------
# cardinalities
#
# All results are exact arbitrary-precision integers: realistic spaces
# (e.g. 35^12) overflow 64-bit arithmetic.
# ---------------------------------------------------------------------------

def pipeline_cardinality(params: SpaceParams) -> int:
    """Distinct pipelines: (P_B * N_B) ** L_B."""
    return (params.P_B * params.N_B) ** params.L_B


def conv_part_cardinality(params: SpaceParams) -> int:
    """Distinct convolution parts: (P_B * N_B) ** (L_B * L_p)."""
    return (params.P_B * params.N_B) ** (params.L_B * params.L_p)


def reduction_cardinality(params: SpaceParams) -> int:
    """Distinct reduction parts: P_r * N_r**L_r (blocks before the merge, one
    per parallel branch) + P_r * N_r (a single block after the merge)."""
    return params.P_r * params.N_r ** params.L_r + params.P_r * params.N_r


def structure_cardinality(params: SpaceParams) -> int:
    """Distinct cell-stack structures: (P_c * N_c) ** L_c."""
    return (params.P_c * params.N_c) ** params.L_c


def cell_complexity(params: SpaceParams) -> int:
    """Per-cell complexity figure of the two-loop search:
    (P_B*N_B)**L_B + P_r*N_r*(N_r**L_r + 1).

    Diagnostic output only. It neither includes the L_p exponent of the
    convolution part nor matches reduction_cardinality's second term; decoding
    follows the per-level cardinalities above, this figure is reported as-is.
    """
    p = params
    return (p.P_B * p.N_B) ** p.L_B + p.P_r * p.N_r * (p.N_r ** p.L_r + 1)


def total_cardinality(params: SpaceParams) -> int:
    """Count of distinct digit genomes:
    structure * (pipeline**L_p * reduction) ** N_c."""
    per_cell = pipeline_cardinality(params) ** params.L_p * reduction_cardinality(params)
    return structure_cardinality(params) * per_cell ** params.N_c


# ---------------------------------------------------------------------------
# config file loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {"blocks", "block_options", "reduction_blocks", "merge_modes",
             "sampling_modes", "layers", "input_shape", "stem_filters",
             "head", "objectives", "ea"}
_LAYER_KEYS = {"L_c", "N_c", "L_p", "L_B", "L_r", "allow_mismatched_L_r"}
_EA_KEYS = {"population", "generations", "seed", "crossover_prob", "crossover_eta",
            "mutation_prob", "mutation_eta", "mode", "strategy",
            "inner_population", "inner_generations"}


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise ConfigError(f"{ctx}{key}: missing required key")
    return obj[key]


def _check_keys(obj: dict, allowed: set, ctx: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{ctx.rstrip('.') or 'config'}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{ctx}{key}: unknown key")


def _int(value, key: str, minimum: int = 1) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{key}: expected integer >= {minimum}, got {value!r}")
    return value


def _nonempty_list(value, key: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: expected a non-empty list")
    return value


def _parse_operation(obj: dict, ctx: str) -> Operation:
    _check_keys(obj, {"kind", "kernel"}, ctx)
    kind = _require(obj, "kind", ctx)
    if kind not in OP_KINDS:
        raise ConfigError(f"{ctx}kind: unknown operation kind {kind!r}")
    if kind == "identity":
        return Operation("identity")
    kernel = _int(_require(obj, "kernel", ctx), f"{ctx}kernel")
    return Operation(kind, kernel)


def _parse_option(obj: dict, ctx: str) -> BlockOption:
    _check_keys(obj, {"skip", "batch_norm", "activation"}, ctx)
    skip = bool(obj.get("skip", False))
    activation = obj.get("activation", "none")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"{ctx}activation: unknown tag {activation!r}")
    return BlockOption(skip=skip, batch_norm=bool(obj.get("batch_norm", False)),
                       activation=activation)


def _parse_head(items: list, ctx: str) -> tuple[HeadLayer, ...]:
    out = []
    for i, obj in enumerate(items):
        c = f"{ctx}[{i}]."
        _check_keys(obj, {"type", "units", "activation", "rate"}, c)
        kind = _require(obj, "type", c)
        if kind == "dense":
            act = obj.get("activation", "none")
            if act not in HEAD_ACTIVATIONS:
                raise ConfigError(f"{c}activation: unknown tag {act!r}")
            out.append(HeadLayer("dense", units=_int(_require(obj, "units", c), f"{c}units"),
                                 activation=act))
        elif kind == "dropout":
            rate = _require(obj, "rate", c)
            if not isinstance(rate, (int, float)) or not 0.0 <= rate < 1.0:
                raise ConfigError(f"{c}rate: must be in [0, 1), got {rate!r}")
            out.append(HeadLayer("dropout", rate=float(rate)))
        else:
            raise ConfigError(f"{c}type: unknown tag {kind!r}")
    return tuple(out)


def config_from_dict(obj: dict) -> SearchConfig:
    """Validate a parsed config object. Strict: unknown keys are errors."""
    _check_keys(obj, _TOP_KEYS, "")

    blocks = []
    for i, b in enumerate(_nonempty_list(_require(obj, "blocks", ""), "blocks")):
        ctx = f"blocks[{i}]."
        _check_keys(b, {"name", "kind", "kernel"}, ctx)
        op = _parse_operation({k: v for k, v in b.items() if k != "name"}, ctx)
        blocks.append(BlockDef(str(b.get("name", f"block{i}")), op))

    options = tuple(_parse_option(o, f"block_options[{i}].")
                    for i, o in enumerate(_nonempty_list(
                        _require(obj, "block_options", ""), "block_options")))

    reductions = tuple(_parse_operation(o, f"reduction_blocks[{i}].")
                       for i, o in enumerate(_nonempty_list(
                           _require(obj, "reduction_blocks", ""), "reduction_blocks")))

    merges = _nonempty_list(_require(obj, "merge_modes", ""), "merge_modes")
    for i, m in enumerate(merges):
        if m not in MERGE_MODES:
            raise ConfigError(f"merge_modes[{i}]: unknown tag {m!r}")
    samplings = _nonempty_list(_require(obj, "sampling_modes", ""), "sampling_modes")
    for i, m in enumerate(samplings):
        if m not in SAMPLING_MODES:
            raise ConfigError(f"sampling_modes[{i}]: unknown tag {m!r}")

    layers = _require(obj, "layers", "")
    _check_keys(layers, _LAYER_KEYS, "layers.")
    L_c = _int(_require(layers, "L_c", "layers."), "layers.L_c")
    N_c = _int(_require(layers, "N_c", "layers."), "layers.N_c")
    L_p = _int(_require(layers, "L_p", "layers."), "layers.L_p")
    L_B = _int(_require(layers, "L_B", "layers."), "layers.L_B")
    # One reduction block per parallel pipeline branch: L_r defaults to L_p and
    # a mismatch must be opted into explicitly.
    L_r = _int(layers.get("L_r", L_p), "layers.L_r")
    if L_r != L_p and not layers.get("allow_mismatched_L_r", False):
        raise ConfigError(
            f"layers.L_r: {L_r} != L_p ({L_p}); set layers.allow_mismatched_L_r to permit")

    params = SpaceParams(L_c=L_c, N_c=N_c, P_c=len(samplings), L_p=L_p, L_B=L_B,
                         N_B=len(blocks), P_B=len(options), L_r=L_r,
                         N_r=len(reductions), P_r=len(merges))

    shape = _require(obj, "input_shape", "")
    if (not isinstance(shape, list) or len(shape) != 3
            or any(not isinstance(v, int) or v < 1 for v in shape)):
        raise ConfigError(f"input_shape: expected [H, W, C] positive integers, got {shape!r}")

    head = _parse_head(_nonempty_list(_require(obj, "head", ""), "head"), "head")

    objectives = _require(obj, "objectives", "")
    _check_keys(objectives, {"total_param"}, "objectives.")
    total_param = _int(_require(objectives, "total_param", "objectives."),
                       "objectives.total_param")

    ea_obj = obj.get("ea", {})
    _check_keys(ea_obj, _EA_KEYS, "ea.")
    ea = EAParams(**ea_obj)

    return SearchConfig(
        params=params,
        blocks=tuple(blocks),
        block_options=options,
        reduction_blocks=reductions,
        merge_modes=tuple(merges),
        sampling_modes=tuple(samplings),
        input_shape=(shape[0], shape[1], shape[2]),
        stem_filters=_int(_require(obj, "stem_filters", ""), "stem_filters"),
        head=head,
        total_param=total_param,
        ea=ea,
    )


def load_config(path) -> SearchConfig:
    """Load and validate a search-space config from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    return config_from_dict(obj)


def config_to_dict(config: SearchConfig) -> dict:
    """Normalized dict form of a config (defaults made explicit). Used for
    fingerprinting and round-trips; feeding it back through config_from_dict
    yields an equal SearchConfig."""
    return {
        "blocks": [{"name": b.name, "kind": b.op.kind, "kernel": b.op.kernel}
                   for b in config.blocks],
        "block_options": [{"skip": o.skip, "batch_norm": o.batch_norm,
                           "activation": o.activation} for o in config.block_options],
        "reduction_blocks": [{"kind": r.kind, "kernel": r.kernel}
                             for r in config.reduction_blocks],
        "merge_modes": list(config.merge_modes),
        "sampling_modes": list(config.sampling_modes),
        "layers": {"L_c": config.params.L_c, "N_c": config.params.N_c,
                   "L_p": config.params.L_p, "L_B": config.params.L_B,
                   "L_r": config.params.L_r,
                   "allow_mismatched_L_r": config.params.L_r != config.params.L_p},
        "input_shape": list(config.input_shape),
        "stem_filters": config.stem_filters,
        "head": [
            {"type": "dense", "units": h.units, "activation": h.activation}
            if h.type == "dense" else {"type": "dropout", "rate": h.rate}
            for h in config.head
        ],
        "objectives": {"total_param": config.total_param},
        "ea": {k: getattr(config.ea, k) for k in sorted(_EA_KEYS)},
    }


def bundled_config_path(name: str):
    """Path to a config shipped with the package ('default' or 'tiny')."""
    ref = resources.files(__package__) / "configs" / f"{name}.json"
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return ref


def default_config() -> SearchConfig:
    """The shipped full-size space: 5 blocks x 7 options, 3 pipelines of 4
    blocks, 2 cells in 2 layers, MNIST-shaped input."""
    return load_config(bundled_config_path("default"))


def tiny_config() -> SearchConfig:
    """The 64-genome space used for exhaustive/brute-force testing."""
    return load_config(bundled_config_path("tiny"))
