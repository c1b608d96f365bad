"""Constrained multi-objective evolutionary search over genomes.

NSGA-II machinery (feasibility-first dominance, fast non-dominated sort,
crowding distance, binary tournaments) drives two strategies:

* single loop -- one EA over the whole genome vector;
* two phase -- an outer single-objective EA proposes cell gene-sets, an inner
  EA places cells into layers (structure genes only); the outer fitness is
  the 2-D hypervolume of the inner front and the result is the union archive
  of all inner fronts.

Variation runs on a real relaxation of each digit over [0, radix-1]: SBX and
polynomial mutation with a distribution index, then round to nearest (ties to
even) and clamp, so every produced genome is in range before it is decoded.
The EA state machine is single-threaded; identical (config, seed, evaluator
results) reproduce identical runs bit for bit.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field

from .evaluate import CachedEvaluator, EvaluationCache, EvaluationRequest, TrainingBudget
from .genome import (DigitGenome, digit_radixes, flatten_digits, genome_from_digits,
                     pack, packed_bounds, packed_from_genes, unpack,
                     enumerate_genomes, decode)
from .graph import build_graph
from .metrics import ObjectiveVector, total_param_count
from .space import EAParams, SearchConfig, total_cardinality

log = logging.getLogger("cellspace.evolve")

PACKED_GENE_LIMIT = 1 << 53  # packed mode relaxes genes to floats; exactness bound


@dataclass
class Individual:
    genome: DigitGenome
    objectives: ObjectiveVector
    param_count: int
    rank: int = 0
    crowding: float = 0.0


class ParetoArchive:
    """All-time set of mutually constrained-non-dominated individuals,
    deduplicated by genome."""

    def __init__(self):
        self.entries: list[Individual] = []

    def add(self, ind: Individual) -> bool:
        for e in self.entries:
            if e.genome == ind.genome:
                return False
            if _dominates(e.objectives, ind.objectives):
                return False
        self.entries = [e for e in self.entries
                        if not _dominates(ind.objectives, e.objectives)]
        self.entries.append(ind)
        return True

    def genome_set(self) -> set[tuple[int, ...]]:
        return {tuple(flatten_digits(e.genome)) for e in self.entries}

    def feasible(self) -> list[Individual]:
        return [e for e in self.entries if e.objectives.feasible]

    def sorted_entries(self) -> list[Individual]:
        return sorted(self.entries,
                      key=lambda e: (e.objectives.f1, e.objectives.f2,
                                     flatten_digits(e.genome)))

    def best_f1(self) -> float | None:
        feasible = self.feasible()
        return min(e.objectives.f1 for e in feasible) if feasible else None

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------------------
# dominance, sorting, crowding
# ---------------------------------------------------------------------------

def _dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    a_ok, b_ok = a.g <= 0.0, b.g <= 0.0
    if a_ok != b_ok:
        return a_ok  # feasibility first
    if not a_ok:
        return a.g < b.g  # both infeasible: smaller violation wins
    return (a.f1 <= b.f1 and a.f2 <= b.f2) and (a.f1 < b.f1 or a.f2 < b.f2)


def constrained_dominates(a: Individual, b: Individual) -> bool:
    """Deb's feasibility-first rule: feasible beats infeasible, infeasible
    compare by constraint violation, feasible compare by Pareto dominance."""
    return _dominates(a.objectives, b.objectives)


def fast_nondominated_sort(pop: list[Individual]) -> list[list[Individual]]:
    """Partition into fronts F1, F2, ... and assign 0-based ranks."""
    dominated: list[list[int]] = [[] for _ in pop]
    counts = [0] * len(pop)
    for i, a in enumerate(pop):
        for j in range(i + 1, len(pop)):
            b = pop[j]
            if _dominates(a.objectives, b.objectives):
                dominated[i].append(j)
                counts[j] += 1
            elif _dominates(b.objectives, a.objectives):
                dominated[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i, c in enumerate(counts) if c == 0]
    rank = 0
    while current:
        for i in current:
            pop[i].rank = rank
        fronts.append([pop[i] for i in current])
        upcoming = []
        for i in current:
            for j in dominated[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    upcoming.append(j)
        current = upcoming
        rank += 1
    return fronts


def crowding_distance(front: list[Individual]) -> None:
    """Assign NSGA-II crowding: boundary individuals get infinity, interior
    ones the sum of normalized neighbor gaps per objective. A zero objective
    range contributes nothing."""
    for ind in front:
        ind.crowding = 0.0
    for key in (lambda i: i.objectives.f1, lambda i: i.objectives.f2):
        ordered = sorted(front, key=key)
        ordered[0].crowding = math.inf
        ordered[-1].crowding = math.inf
        span = key(ordered[-1]) - key(ordered[0])
        if span <= 0.0:
            continue
        for k in range(1, len(ordered) - 1):
            if ordered[k].crowding != math.inf:
                ordered[k].crowding += (key(ordered[k + 1]) - key(ordered[k - 1])) / span


def _rank_population(pop: list[Individual]) -> None:
    for front in fast_nondominated_sort(pop):
        crowding_distance(front)


# ---------------------------------------------------------------------------
# variation operators
# ---------------------------------------------------------------------------

def _sbx_real(x1: float, x2: float, eta: float, u: float) -> tuple[float, float]:
    # mean/diff form keeps equal parents exactly fixed and the midpoint exact
    if u <= 0.5:
        beta = (2.0 * u) ** (1.0 / (eta + 1.0))
    else:
        beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
    mean = 0.5 * (x1 + x2)
    spread = 0.5 * beta * (x2 - x1)
    return mean - spread, mean + spread


def _round_clamp(value: float, radix: int) -> int:
    return min(radix - 1, max(0, round(value)))


def _sbx_vectors(v1, v2, bounds, positions, prob, eta, rng):
    c1, c2 = list(v1), list(v2)
    if rng.random() > prob:
        return c1, c2
    for i in positions:
        r1, r2 = _sbx_real(float(v1[i]), float(v2[i]), eta, rng.random())
        if rng.random() < 0.5:  # standard per-digit exchange coin
            r1, r2 = r2, r1
        c1[i] = _round_clamp(r1, bounds[i])
        c2[i] = _round_clamp(r2, bounds[i])
    return c1, c2


def _mutate_real(x: float, lo: float, hi: float, eta: float, u: float) -> float:
    span = hi - lo
    if u < 0.5:
        frac = 1.0 - (x - lo) / span
        val = 2.0 * u + (1.0 - 2.0 * u) * frac ** (eta + 1.0)
        delta = val ** (1.0 / (eta + 1.0)) - 1.0
    else:
        frac = 1.0 - (hi - x) / span
        val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * frac ** (eta + 1.0)
        delta = 1.0 - val ** (1.0 / (eta + 1.0))
    return x + delta * span


def _mutate_vector(vec, bounds, positions, prob, eta, rng):
    out = list(vec)
    for i in positions:
        if rng.random() >= prob:
            continue
        if bounds[i] <= 1:
            continue  # degenerate single-value digit
        value = _mutate_real(float(vec[i]), 0.0, float(bounds[i] - 1), eta, rng.random())
        out[i] = _round_clamp(value, bounds[i])
    return out


def sbx_crossover(p1: DigitGenome, p2: DigitGenome, params, ea: EAParams,
                  rng: random.Random) -> tuple[DigitGenome, DigitGenome]:
    """Per-digit simulated binary crossover on two genomes of the same shape.

    `params` are the SpaceParams supplying each digit's radix.
    """
    v1, v2 = flatten_digits(p1), flatten_digits(p2)
    if len(v1) != len(v2):
        raise ValueError("parent genomes differ in shape")
    radixes = digit_radixes(params)
    c1, c2 = _sbx_vectors(v1, v2, radixes, range(len(v1)),
                          ea.crossover_prob, ea.crossover_eta, rng)
    return genome_from_digits(c1, params), genome_from_digits(c2, params)


def polynomial_mutation(genome: DigitGenome, params, ea: EAParams,
                        rng: random.Random) -> DigitGenome:
    """Per-digit polynomial mutation over each digit's [0, radix-1] range."""
    radixes = digit_radixes(params)
    vec = _mutate_vector(flatten_digits(genome), radixes, range(len(radixes)),
                         ea.mutation_prob, ea.mutation_eta, rng)
    return genome_from_digits(vec, params)


# ---------------------------------------------------------------------------
# genome vector spaces (digit vs packed EA modes)
# ---------------------------------------------------------------------------

class _VectorSpace:
    """The EA's view of a genome: a bounded integer vector. Digit mode uses
    the canonical digits; packed mode uses the compact gene vector (requires
    every gene bound below 2^53 so float relaxation stays exact)."""

    def __init__(self, config: SearchConfig, mode: str):
        self.params = config.params
        self.mode = mode
        if mode == "digit":
            self.bounds = digit_radixes(self.params)
            self.structure_len = self.params.L_c
        else:
            self.bounds = packed_bounds(self.params)
            self.structure_len = 1
            for b in self.bounds:
                if b >= PACKED_GENE_LIMIT:
                    raise ValueError(
                        f"packed mode needs every gene bound < 2^53, got {b}")

    def to_genome(self, vec) -> DigitGenome:
        if self.mode == "digit":
            return genome_from_digits(vec, self.params)
        return unpack(packed_from_genes(vec, self.params), self.params)

    def from_genome(self, genome: DigitGenome) -> list[int]:
        if self.mode == "digit":
            return flatten_digits(genome)
        return list(pack(genome, self.params).genes)

    def random_vector(self, rng, positions, template=None) -> list[int]:
        vec = list(template) if template is not None else [0] * len(self.bounds)
        for i in positions:
            vec[i] = rng.randrange(self.bounds[i])
        return vec


# ---------------------------------------------------------------------------
# evaluation plumbing
# ---------------------------------------------------------------------------

class _Evaluation:
    """Turns genomes into evaluated Individuals through the shared cache."""

    def __init__(self, config: SearchConfig, evaluator, cache: EvaluationCache | None,
                 budget: TrainingBudget | None = None):
        from .artifacts import export_architecture
        self._export = export_architecture
        self.config = config
        self.budget = budget if budget is not None else TrainingBudget()
        self.cached = CachedEvaluator(evaluator, cache)
        self._params_memo: dict[tuple[int, ...], int] = {}
        self._next_id = 0

    @property
    def evals(self) -> int:
        return self.cached.misses

    def _param_count(self, genome, graph=None) -> int:
        key = tuple(flatten_digits(genome))
        if key not in self._params_memo:
            graph = graph or build_graph(decode(genome, self.config), self.config)
            self._params_memo[key] = total_param_count(graph)
        return self._params_memo[key]

    def evaluate_genomes(self, genomes: list[DigitGenome],
                         archive: ParetoArchive | None = None) -> list[Individual]:
        requests, seen = [], set()
        for genome in genomes:
            key = tuple(flatten_digits(genome))
            if key in seen or self.cached.cache.lookup(genome) is not None:
                continue
            seen.add(key)
            graph = build_graph(decode(genome, self.config), self.config)
            self._params_memo[key] = total_param_count(graph)
            requests.append(EvaluationRequest(
                self._next_id, genome, self._export(genome, graph, self.config),
                self.budget))
            self._next_id += 1
        if requests:
            self.cached.evaluate(requests)

        out = []
        for genome in genomes:
            result = self.cached.cache.lookup(genome)
            params = self._param_count(genome)
            f2 = params / self.config.total_param
            vec = ObjectiveVector(f1=1.0 - result.accuracy, f2=f2, g=f2 - 1.0)
            ind = Individual(genome, vec, params)
            if archive is not None:
                archive.add(ind)
            out.append(ind)
        return out


# ---------------------------------------------------------------------------
# hypervolume
# ---------------------------------------------------------------------------

def hypervolume_2d(front, ref=(1.0, 1.0)) -> float:
    """Exact area dominated by a 2-D front relative to `ref`.

    Points outside the reference box are clipped out and dominated points are
    ignored, so any point set is accepted. Sweep: sort by f1 ascending and sum
    the staircase rectangles (f1_next - f1_i) * (ref_f2 - f2_i).
    """
    pts = []
    for p in front:
        f1, f2 = (p.f1, p.f2) if hasattr(p, "f1") else (p[0], p[1])
        if f1 <= ref[0] and f2 <= ref[1]:
            pts.append((f1, f2))
    pts.sort()
    stairs = []
    for f1, f2 in pts:
        if not stairs or f2 < stairs[-1][1]:
            stairs.append((f1, f2))
    area = 0.0
    for k, (f1, f2) in enumerate(stairs):
        nxt = stairs[k + 1][0] if k + 1 < len(stairs) else ref[0]
        area += (nxt - f1) * (ref[1] - f2)
    return area


# ---------------------------------------------------------------------------
# search loops
# ---------------------------------------------------------------------------

def _tournament(pop: list[Individual], rng) -> Individual:
    i, j = rng.randrange(len(pop)), rng.randrange(len(pop))
    a, b = pop[i], pop[j]
    # rank first, then crowding, ties broken by lower population index
    if (a.rank, -a.crowding, i) <= (b.rank, -b.crowding, j):
        return a
    return b


def _truncate(fronts: list[list[Individual]], size: int) -> list[Individual]:
    out: list[Individual] = []
    for front in fronts:
        if len(out) + len(front) <= size:
            out.extend(front)
        else:
            rest = sorted(front, key=lambda ind: -ind.crowding)  # stable on ties
            out.extend(rest[:size - len(out)])
            break
    return out


def _generation_record(gen: int, ev: _Evaluation, archive: ParetoArchive) -> dict:
    return {"gen": gen, "evals": ev.evals, "best_f1": archive.best_f1(),
            "archive_size": len(archive),
            "hypervolume": hypervolume_2d([e.objectives for e in archive.feasible()])}


def _run_nsga2(space: _VectorSpace, ev: _Evaluation, rng, positions, template,
               population: int, generations: int, ea: EAParams,
               archive: ParetoArchive, on_generation=None) -> list[Individual]:
    vecs = [space.random_vector(rng, positions, template) for _ in range(population)]
    pop = ev.evaluate_genomes([space.to_genome(v) for v in vecs], archive)
    _rank_population(pop)
    if on_generation:
        on_generation(0)
    for gen in range(1, generations + 1):
        offspring_vecs = []
        while len(offspring_vecs) < population:
            p1, p2 = _tournament(pop, rng), _tournament(pop, rng)
            c1, c2 = _sbx_vectors(space.from_genome(p1.genome),
                                  space.from_genome(p2.genome),
                                  space.bounds, positions,
                                  ea.crossover_prob, ea.crossover_eta, rng)
            for child in (c1, c2):
                if len(offspring_vecs) < population:
                    offspring_vecs.append(_mutate_vector(
                        child, space.bounds, positions,
                        ea.mutation_prob, ea.mutation_eta, rng))
        offspring = ev.evaluate_genomes(
            [space.to_genome(v) for v in offspring_vecs], archive)
        merged = pop + offspring
        fronts = fast_nondominated_sort(merged)
        for front in fronts:
            crowding_distance(front)
        pop = _truncate(fronts, population)
        if on_generation:
            on_generation(gen)
    return pop


def evolve_single_loop(config: SearchConfig, evaluator, log_records: list | None = None,
                       cache: EvaluationCache | None = None,
                       budget: TrainingBudget | None = None) -> ParetoArchive:
    """One EA over the whole genome vector for exactly ea.generations
    generations. Returns the all-time archive."""
    ea = config.ea
    rng = random.Random(ea.seed)
    space = _VectorSpace(config, ea.mode)
    ev = _Evaluation(config, evaluator, cache, budget)
    archive = ParetoArchive()
    positions = range(len(space.bounds))

    def emit(gen):
        record = _generation_record(gen, ev, archive)
        if log_records is not None:
            log_records.append(record)
        log.info("gen %d: evals=%d archive=%d best_f1=%s",
                 gen, record["evals"], record["archive_size"], record["best_f1"])

    _run_nsga2(space, ev, rng, positions, None, ea.population, ea.generations,
               ea, archive, emit)
    return archive


def evolve_two_phase(config: SearchConfig, evaluator, log_records: list | None = None,
                     cache: EvaluationCache | None = None,
                     budget: TrainingBudget | None = None) -> ParetoArchive:
    """Outer EA over cell gene-sets, inner EA over structure genes.

    The outer loop is single-objective: a cell-set's fitness is the (1,1)
    reference hypervolume of the Pareto front its inner run produces with
    the cells frozen. The union of every inner front, re-filtered, is the
    returned archive.
    """
    ea = config.ea
    rng = random.Random(ea.seed)
    space = _VectorSpace(config, ea.mode)
    ev = _Evaluation(config, evaluator, cache, budget)
    union = ParetoArchive()
    n = len(space.bounds)
    cell_positions = list(range(space.structure_len, n))
    structure_positions = list(range(space.structure_len))
    fitness_memo: dict[tuple[int, ...], float] = {}

    def outer_fitness(cell_vec: list[int]) -> float:
        key = tuple(cell_vec)
        if key in fitness_memo:
            return fitness_memo[key]
        inner_rng = random.Random(rng.getrandbits(32))
        inner_archive = ParetoArchive()
        template = [0] * space.structure_len + list(cell_vec)
        _run_nsga2(space, ev, inner_rng, structure_positions, template,
                   ea.inner_population, ea.inner_generations, ea, inner_archive)
        for ind in inner_archive.entries:
            union.add(ind)
        hv = hypervolume_2d([e.objectives for e in inner_archive.feasible()])
        fitness_memo[key] = hv
        return hv

    def emit(gen):
        record = _generation_record(gen, ev, union)
        if log_records is not None:
            log_records.append(record)
        log.info("outer gen %d: evals=%d archive=%d", gen, record["evals"],
                 record["archive_size"])

    cell_bounds = [space.bounds[i] for i in cell_positions]
    all_cells = range(len(cell_bounds))
    pop = [[rng.randrange(b) for b in cell_bounds] for _ in range(ea.population)]
    fits = [outer_fitness(v) for v in pop]
    emit(0)

    def pick():
        i, j = rng.randrange(len(pop)), rng.randrange(len(pop))
        return pop[i] if (-fits[i], i) <= (-fits[j], j) else pop[j]

    for gen in range(1, ea.generations + 1):
        offspring = []
        while len(offspring) < ea.population:
            c1, c2 = _sbx_vectors(pick(), pick(), cell_bounds, all_cells,
                                  ea.crossover_prob, ea.crossover_eta, rng)
            for child in (c1, c2):
                if len(offspring) < ea.population:
                    offspring.append(_mutate_vector(child, cell_bounds, all_cells,
                                                    ea.mutation_prob, ea.mutation_eta,
                                                    rng))
        off_fits = [outer_fitness(v) for v in offspring]
        merged = list(zip(pop + offspring, fits + off_fits))
        order = sorted(range(len(merged)), key=lambda k: (-merged[k][1], k))
        keep = order[:ea.population]
        pop = [merged[k][0] for k in keep]
        fits = [merged[k][1] for k in keep]
        emit(gen)
    return union


def brute_force_pareto(config: SearchConfig, evaluator,
                       limit: int = 100000,
                       cache: EvaluationCache | None = None) -> ParetoArchive:
    """Exact constrained Pareto front by exhaustive enumeration (testing
    oracle). Refuses spaces larger than `limit` genomes."""
    total = total_cardinality(config.params)
    if total > limit:
        raise ValueError(f"space too large to enumerate: {total} > {limit}")
    ev = _Evaluation(config, evaluator, cache)
    archive = ParetoArchive()
    batch: list[DigitGenome] = []
    for genome in enumerate_genomes(config.params, limit):
        batch.append(genome)
        if len(batch) >= 256:
            ev.evaluate_genomes(batch, archive)
            batch.clear()
    if batch:
        ev.evaluate_genomes(batch, archive)
    return archive
