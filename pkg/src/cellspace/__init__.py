"""Cell-based CNN architecture search space toolkit.

A hierarchical cell/pipeline/block search space over integer-vector genomes,
with exact cardinality accounting, a total genome-to-graph decoder, analytic
parameter counting, and a constrained multi-objective evolutionary search
(NSGA-II style) with pluggable fitness evaluation.
"""
from .space import (BlockDef, BlockOption, ConfigError, EAParams, HeadLayer,
                    Operation, SearchConfig, SpaceParams, cell_complexity,
                    config_from_dict, config_to_dict, conv_part_cardinality,
                    default_config, load_config, pipeline_cardinality,
                    reduction_cardinality, structure_cardinality, tiny_config,
                    total_cardinality)
from .genome import (ArchitecturePlan, BlockStep, CellPlan, DigitGenome,
                     PackedGenome, ReductionPlan, decode, decode_pipeline_gene,
                     decode_reduction_gene, decode_structure_gene, digit_radixes,
                     flatten_digits, genome_from_digits, genome_from_json,
                     genome_hash, genome_to_json, pack, random_genome, unpack)
from .graph import ArchGraph, ArchNode, GraphError, TensorShape, attach_head, build_graph, infer_shapes
from .metrics import ObjectiveVector, node_param_count, objective_vector, total_param_count
from .evaluate import (CachedEvaluator, EvaluationCache, EvaluationRequest,
                       EvaluationResult, EvaluatorError, ExternalEvaluator,
                       SurrogateEvaluator, surrogate_evaluate)
from .evolve import (Individual, ParetoArchive, brute_force_pareto,
                     constrained_dominates, crowding_distance, evolve_single_loop,
                     evolve_two_phase, fast_nondominated_sort, hypervolume_2d,
                     polynomial_mutation, sbx_crossover)
from .artifacts import (canonical_json, config_fingerprint, export_architecture,
                        export_pareto_csv, export_pareto_json, render_pareto_svg)

__version__ = "0.1.0"
