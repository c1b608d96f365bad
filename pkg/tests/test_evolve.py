import dataclasses
import math
import random

import pytest

from cellspace.evaluate import SurrogateEvaluator
from cellspace.evolve import (Individual, ParetoArchive, _Evaluation, _VectorSpace,
                              _dominates, _run_nsga2, _sbx_real, _sbx_vectors,
                              _mutate_vector, brute_force_pareto, constrained_dominates,
                              crowding_distance, evolve_single_loop, evolve_two_phase,
                              fast_nondominated_sort, hypervolume_2d,
                              polynomial_mutation, sbx_crossover)
from cellspace.genome import digit_radixes, flatten_digits, genome_from_digits, random_genome_from
from cellspace.metrics import ObjectiveVector
from cellspace.space import EAParams, SearchConfig, config_from_dict, config_to_dict


def ind(f1, f2, g=None):
    return Individual(genome=None, param_count=0,
                      objectives=ObjectiveVector(f1, f2, f2 - 1.0 if g is None else g))


def with_ea(cfg, **changes):
    return SearchConfig(**{**cfg.__dict__, "ea": dataclasses.replace(cfg.ea, **changes)})


class TestDominance:
    def test_strict_dominance(self):
        assert constrained_dominates(ind(0.1, 0.5, -0.5), ind(0.2, 0.6, -0.4))

    def test_feasibility_first(self):
        assert constrained_dominates(ind(0.9, 0.9, -0.1), ind(0.1, 0.1, 0.5))

    def test_incomparable(self):
        a, b = ind(0.1, 0.9, -0.1), ind(0.9, 0.1, -0.1)
        assert not constrained_dominates(a, b)
        assert not constrained_dominates(b, a)

    def test_both_infeasible(self):
        assert constrained_dominates(ind(0.9, 1.5, 0.5), ind(0.1, 1.9, 0.9))

    def test_equal_objectives_do_not_dominate(self):
        a, b = ind(0.3, 0.3), ind(0.3, 0.3)
        assert not constrained_dominates(a, b)
        assert not constrained_dominates(b, a)


def oracle_sort(pop):
    """O(n^2) front partition straight from the definition."""
    remaining = list(pop)
    fronts = []
    while remaining:
        front = [a for a in remaining
                 if not any(b is not a and _dominates(b.objectives, a.objectives)
                            for b in remaining)]
        front_ids = {id(a) for a in front}
        remaining = [a for a in remaining if id(a) not in front_ids]
        fronts.append(front)
    return fronts


def random_population(rng, n):
    pop = []
    for _ in range(n):
        f1 = rng.random()
        f2 = rng.random() * 1.4
        pop.append(ind(f1, f2))
    # sprinkle duplicates so ties get covered
    for _ in range(n // 10):
        pop.append(dataclasses.replace(rng.choice(pop)))
    return pop


class TestSorting:
    def test_hand_case(self):
        pop = [ind(0.1, 0.9), ind(0.5, 0.5), ind(0.9, 0.1), ind(0.6, 0.6)]
        fronts = fast_nondominated_sort(pop)
        assert [sorted((i.objectives.f1, i.objectives.f2) for i in f) for f in fronts] == [
            [(0.1, 0.9), (0.5, 0.5), (0.9, 0.1)], [(0.6, 0.6)]]
        assert [pop[i].rank for i in range(4)] == [0, 0, 0, 1]

    def test_single_individual(self):
        pop = [ind(0.5, 0.5)]
        assert fast_nondominated_sort(pop) == [pop]

    def test_matches_oracle(self):
        rng = random.Random(77)
        for trial in range(200):
            pop = random_population(rng, rng.randint(1, 40))
            fast = fast_nondominated_sort(pop)
            slow = oracle_sort(pop)
            assert [sorted(id(i) for i in f) for f in fast] == \
                   [sorted(id(i) for i in f) for f in slow]


class TestCrowding:
    def test_front_of_two(self):
        front = [ind(0.2, 0.8), ind(0.8, 0.2)]
        crowding_distance(front)
        assert front[0].crowding == front[1].crowding == math.inf

    def test_hand_case(self):
        front = [ind(0.0, 1.0), ind(0.5, 0.5), ind(1.0, 0.0)]
        crowding_distance(front)
        assert front[1].crowding == pytest.approx(2.0)
        assert front[0].crowding == front[2].crowding == math.inf

    def test_identical_objectives(self):
        front = [ind(0.4, 0.4) for _ in range(5)]
        crowding_distance(front)
        values = sorted(i.crowding for i in front)
        assert values[:3] == [0.0, 0.0, 0.0]
        assert values[3:] == [math.inf, math.inf]


class TestSBX:
    def test_equal_parents_fixed_point(self, tiny_cfg):
        rng = random.Random(0)
        ea = EAParams(population=4, generations=1)
        g = random_genome_from(rng, tiny_cfg.params)
        c1, c2 = sbx_crossover(g, g, tiny_cfg.params, ea, rng)
        assert c1 == g and c2 == g

    def test_equal_values_fixed_pre_rounding(self):
        rng = random.Random(1)
        for _ in range(1000):
            x = rng.uniform(0, 34)
            r1, r2 = _sbx_real(x, x, 3.0, rng.random())
            assert r1 == x and r2 == x

    def test_mean_preservation(self):
        rng = random.Random(2)
        for _ in range(100000):
            x1, x2 = rng.uniform(0, 34), rng.uniform(0, 34)
            r1, r2 = _sbx_real(x1, x2, 3.0, rng.random())
            assert math.isclose((r1 + r2) / 2, (x1 + x2) / 2,
                                rel_tol=1e-9, abs_tol=1e-9)

    def test_children_in_bounds(self, default_cfg):
        rng = random.Random(3)
        radixes = digit_radixes(default_cfg.params)
        ea = default_cfg.ea
        for _ in range(4000):  # 4000 crossovers x 28 digits > 10^5 digit operations
            p1 = random_genome_from(rng, default_cfg.params)
            p2 = random_genome_from(rng, default_cfg.params)
            c1, c2 = sbx_crossover(p1, p2, default_cfg.params, ea, rng)
            for child in (c1, c2):
                for d, radix in zip(flatten_digits(child), radixes):
                    assert 0 <= d < radix

    def test_crossover_prob_zero_copies(self, tiny_cfg):
        rng = random.Random(4)
        ea = dataclasses.replace(tiny_cfg.ea, crossover_prob=0.0)
        p1 = random_genome_from(rng, tiny_cfg.params)
        p2 = random_genome_from(rng, tiny_cfg.params)
        c1, c2 = sbx_crossover(p1, p2, tiny_cfg.params, ea, rng)
        assert c1 == p1 and c2 == p2


class TestMutation:
    def test_radix_one_unchanged(self):
        rng = random.Random(5)
        out = _mutate_vector([0, 3], [1, 8], range(2), 1.0, 3.0, rng)
        assert out[0] == 0

    def test_outputs_in_bounds(self, default_cfg):
        rng = random.Random(6)
        radixes = digit_radixes(default_cfg.params)
        ea = default_cfg.ea
        for _ in range(4000):
            g = random_genome_from(rng, default_cfg.params)
            mutated = polynomial_mutation(g, default_cfg.params, ea, rng)
            for d, radix in zip(flatten_digits(mutated), radixes):
                assert 0 <= d < radix

    def test_symmetric_at_center_digit(self):
        import scipy.stats
        rng = random.Random(7)
        counts = [0] * 35
        for _ in range(100000):
            (value,) = _mutate_vector([17], [35], range(1), 1.0, 3.0, rng)
            counts[value] += 1
        # under symmetry each (17-k, 17+k) pair splits binomially
        stat, dof = 0.0, 0
        for k in range(1, 18):
            a, b = counts[17 - k], counts[17 + k]
            if a + b:
                stat += (a - b) ** 2 / (a + b)
                dof += 1
        assert scipy.stats.chi2.sf(stat, dof) > 0.001

    def test_mutation_prob_zero(self, tiny_cfg):
        rng = random.Random(8)
        ea = dataclasses.replace(tiny_cfg.ea, mutation_prob=0.0)
        g = random_genome_from(rng, tiny_cfg.params)
        assert polynomial_mutation(g, tiny_cfg.params, ea, rng) == g


class TestHypervolume:
    def test_single_rectangle(self):
        assert hypervolume_2d([(0.2, 0.4)]) == pytest.approx(0.48)

    def test_empty(self):
        assert hypervolume_2d([]) == 0.0

    def test_staircase(self):
        assert hypervolume_2d([(0.2, 0.4), (0.5, 0.1)]) == pytest.approx(0.63)

    def test_dominated_point_ignored(self):
        assert hypervolume_2d([(0.2, 0.4), (0.3, 0.5)]) == pytest.approx(0.48)

    def test_points_outside_ref_clipped(self):
        assert hypervolume_2d([(1.5, 0.2), (0.2, 1.5)]) == 0.0

    def test_accepts_objective_vectors(self):
        assert hypervolume_2d([ObjectiveVector(0.2, 0.4, -0.6)]) == pytest.approx(0.48)


class TestArchive:
    def test_insert_keeps_nondominated(self, tiny_cfg):
        archive = ParetoArchive()
        g1 = genome_from_digits([0, 0, 0, 0], tiny_cfg.params)
        g2 = genome_from_digits([0, 0, 0, 1], tiny_cfg.params)
        a = Individual(g1, ObjectiveVector(0.5, 0.5, -0.5), 1)
        b = Individual(g2, ObjectiveVector(0.4, 0.4, -0.6), 1)
        assert archive.add(a)
        assert archive.add(b)  # dominates a, which must vanish
        assert archive.entries == [b]

    def test_dedup_by_genome(self, tiny_cfg):
        archive = ParetoArchive()
        g = genome_from_digits([0, 0, 0, 0], tiny_cfg.params)
        assert archive.add(Individual(g, ObjectiveVector(0.5, 0.5, -0.5), 1))
        assert not archive.add(Individual(g, ObjectiveVector(0.4, 0.6, -0.4), 1))
        assert len(archive) == 1


class TestBruteForce:
    def test_front_self_consistent(self, tiny_cfg):
        archive = brute_force_pareto(tiny_cfg, SurrogateEvaluator())
        entries = archive.entries
        assert entries
        for a in entries:
            for b in entries:
                if a is not b:
                    assert not _dominates(a.objectives, b.objectives)

    def test_nonmembers_dominated(self, tiny_cfg):
        archive = brute_force_pareto(tiny_cfg, SurrogateEvaluator())
        front_genomes = archive.genome_set()
        ev = _Evaluation(tiny_cfg, SurrogateEvaluator(), None)
        from cellspace.genome import enumerate_genomes
        everyone = ev.evaluate_genomes(list(enumerate_genomes(tiny_cfg.params)))
        for candidate in everyone:
            if tuple(flatten_digits(candidate.genome)) in front_genomes:
                continue
            assert any(_dominates(member.objectives, candidate.objectives)
                       for member in archive.entries)

    def test_space_too_large(self, default_cfg):
        with pytest.raises(ValueError, match="too large"):
            brute_force_pareto(default_cfg, SurrogateEvaluator())

    def test_single_genome_space(self, tiny_dict):
        tiny_dict["blocks"] = tiny_dict["blocks"][:1]
        tiny_dict["block_options"] = [{"skip": True}]
        tiny_dict["reduction_blocks"] = tiny_dict["reduction_blocks"][:1]
        tiny_dict["layers"]["L_B"] = 1
        cfg = config_from_dict(tiny_dict)
        archive = brute_force_pareto(cfg, SurrogateEvaluator())
        assert len(archive) == 1


class TestSingleLoop:
    def test_oracle_equivalence(self, tiny_cfg):
        oracle = brute_force_pareto(tiny_cfg, SurrogateEvaluator())
        for seed in (1, 2, 3):
            archive = evolve_single_loop(with_ea(tiny_cfg, seed=seed), SurrogateEvaluator())
            assert archive.genome_set() == oracle.genome_set()

    def test_oracle_equivalence_richer_space(self, tiny_dict):
        # 256-genome space with live structure digits and down-sampling cells;
        # pop 8 misses front members on some seeds (1608 evals need not exhaust
        # 256 points), pop 16 exhausts it for every seed tried
        tiny_dict["sampling_modes"] = ["same", "down"]
        tiny_dict["layers"]["L_c"] = 2
        cfg = config_from_dict(tiny_dict)
        oracle = brute_force_pareto(cfg, SurrogateEvaluator())
        for seed in (1, 2, 3):
            archive = evolve_single_loop(with_ea(cfg, seed=seed, population=16,
                                                 generations=200),
                                         SurrogateEvaluator())
            assert archive.genome_set() == oracle.genome_set()

    def test_zero_generations(self, tiny_cfg):
        cfg = with_ea(tiny_cfg, generations=0, seed=42)
        archive = evolve_single_loop(cfg, SurrogateEvaluator())
        # reconstruct the same initial population and filter it by dominance
        rng = random.Random(42)
        space = _VectorSpace(cfg, "digit")
        vecs = [space.random_vector(rng, range(len(space.bounds)))
                for _ in range(cfg.ea.population)]
        ev = _Evaluation(cfg, SurrogateEvaluator(), None)
        initial = ev.evaluate_genomes([space.to_genome(v) for v in vecs])
        expected = ParetoArchive()
        for individual in initial:
            expected.add(individual)
        assert archive.genome_set() == expected.genome_set()

    def test_determinism(self, tiny_cfg):
        cfg = with_ea(tiny_cfg, generations=40, seed=9)
        rec1, rec2 = [], []
        a1 = evolve_single_loop(cfg, SurrogateEvaluator(), log_records=rec1)
        a2 = evolve_single_loop(cfg, SurrogateEvaluator(), log_records=rec2)
        assert rec1 == rec2  # generation-by-generation
        assert a1.genome_set() == a2.genome_set()

    def test_archive_sound_and_elitist(self, tiny_cfg):
        records = []
        archive = evolve_single_loop(with_ea(tiny_cfg, generations=60, seed=4),
                                     SurrogateEvaluator(), log_records=records)
        for a in archive.entries:
            for b in archive.entries:
                if a is not b:
                    assert not _dominates(a.objectives, b.objectives)
        best = [r["best_f1"] for r in records if r["best_f1"] is not None]
        assert all(x >= y for x, y in zip(best, best[1:]))  # non-increasing

    def test_run_log_schema(self, tiny_cfg):
        records = []
        evolve_single_loop(with_ea(tiny_cfg, generations=3, seed=2),
                           SurrogateEvaluator(), log_records=records)
        assert len(records) == 4  # gen 0 plus 3 generations
        for r in records:
            assert set(r) == {"gen", "evals", "best_f1", "archive_size", "hypervolume"}

    def test_packed_mode_matches_oracle(self, tiny_cfg):
        cfg = with_ea(tiny_cfg, mode="packed", generations=100, seed=3)
        oracle = brute_force_pareto(tiny_cfg, SurrogateEvaluator())
        archive = evolve_single_loop(cfg, SurrogateEvaluator())
        assert archive.genome_set() == oracle.genome_set()
        # packed runs are deterministic too
        again = evolve_single_loop(cfg, SurrogateEvaluator())
        assert archive.genome_set() == again.genome_set()

    def test_packed_mode_rejects_wide_genes(self, default_cfg):
        obj = config_to_dict(default_cfg)
        obj["layers"]["L_B"] = 12  # 35^12 > 2^53
        obj["ea"]["mode"] = "packed"
        cfg = config_from_dict(obj)
        with pytest.raises(ValueError, match="2\\^53"):
            evolve_single_loop(cfg, SurrogateEvaluator())


class TestTwoPhase:
    def test_subset_then_equality(self, tiny_cfg):
        oracle = brute_force_pareto(tiny_cfg, SurrogateEvaluator())
        for seed in (1, 2):
            cfg = with_ea(tiny_cfg, seed=seed, generations=60)
            archive = evolve_two_phase(cfg, SurrogateEvaluator())
            assert archive.genome_set() <= oracle.genome_set()
            assert archive.genome_set() == oracle.genome_set()

    def test_inner_restricted_to_structure(self, tiny_dict):
        # structure space of 4 (two sampling modes, two layers), cells frozen zero
        tiny_dict["sampling_modes"] = ["same", "down"]
        tiny_dict["layers"]["L_c"] = 2
        cfg = config_from_dict(tiny_dict)
        space = _VectorSpace(cfg, "digit")
        ev = _Evaluation(cfg, SurrogateEvaluator(), None)
        inner_archive = ParetoArchive()
        template = [0] * len(space.bounds)
        _run_nsga2(space, ev, random.Random(1), list(range(cfg.params.L_c)), template,
                   4, 20, cfg.ea, inner_archive)
        # restricted brute force: structure digits vary, cell digits all zero
        expected = ParetoArchive()
        ev2 = _Evaluation(cfg, SurrogateEvaluator(), None)
        genomes = []
        base = cfg.params.P_c * cfg.params.N_c
        for d0 in range(base):
            for d1 in range(base):
                genomes.append(genome_from_digits(
                    [d0, d1] + [0] * (len(space.bounds) - 2), cfg.params))
        for individual in ev2.evaluate_genomes(genomes):
            expected.add(individual)
        assert inner_archive.genome_set() == expected.genome_set()

    def test_determinism(self, tiny_cfg):
        cfg = with_ea(tiny_cfg, seed=5, generations=20)
        r1, r2 = [], []
        a1 = evolve_two_phase(cfg, SurrogateEvaluator(), log_records=r1)
        a2 = evolve_two_phase(cfg, SurrogateEvaluator(), log_records=r2)
        assert r1 == r2
        assert a1.genome_set() == a2.genome_set()
