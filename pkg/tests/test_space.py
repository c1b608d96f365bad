import json

import pytest

from cellspace.space import (ConfigError, SpaceParams, cell_complexity,
                             config_from_dict, config_to_dict,
                             conv_part_cardinality, load_config,
                             pipeline_cardinality, reduction_cardinality,
                             structure_cardinality, total_cardinality)
from cellspace.genome import enumerate_genomes


def params(**kw):
    base = dict(L_c=1, N_c=1, P_c=1, L_p=1, L_B=1, N_B=1, P_B=1, L_r=1, N_r=1, P_r=1)
    base.update(kw)
    return SpaceParams(**base)


def powmul(base, exp):
    # independent oracle: repeated multiplication
    out = 1
    for _ in range(exp):
        out *= base
    return out


class TestCardinalities:
    def test_pipeline(self):
        assert pipeline_cardinality(params(P_B=7, N_B=5, L_B=4)) == 1500625
        assert pipeline_cardinality(params(P_B=1, N_B=1, L_B=9)) == 1
        assert pipeline_cardinality(params(P_B=2, N_B=2, L_B=2)) == 16

    def test_reduction(self):
        assert reduction_cardinality(params(P_r=2, N_r=3, L_r=3)) == 60
        assert reduction_cardinality(params(P_r=1, N_r=1, L_r=1)) == 2
        assert reduction_cardinality(params(P_r=1, N_r=2, L_r=1)) == 4

    def test_conv_part(self):
        p = params(P_B=7, N_B=5, L_B=4, L_p=3)
        assert conv_part_cardinality(p) == 3379220508056640625
        assert conv_part_cardinality(p) == powmul(35, 12)
        p1 = params(P_B=7, N_B=5, L_B=4, L_p=1)
        assert conv_part_cardinality(p1) == pipeline_cardinality(p1)
        assert conv_part_cardinality(params(P_B=2, N_B=2, L_B=1, L_p=2)) == 16

    def test_structure(self):
        assert structure_cardinality(params(P_c=2, N_c=2, L_c=2)) == 16
        assert structure_cardinality(params(L_c=1, P_c=1, N_c=3)) == 3
        assert structure_cardinality(params(P_c=3, N_c=2, L_c=3)) == 216

    def test_cell_complexity(self):
        assert cell_complexity(params(P_B=7, N_B=5, L_B=4, P_r=2, N_r=3, L_r=3)) == 1500793
        assert cell_complexity(params()) == 3
        assert cell_complexity(params(P_B=1, N_B=2, L_B=1, P_r=1, N_r=2, L_r=1)) == 8

    def test_total(self, default_cfg):
        assert total_cardinality(params()) == 2
        tiny = params(L_c=1, N_c=1, P_c=1, L_p=1, L_B=2, N_B=2, P_B=2,
                      P_r=1, N_r=2, L_r=1)
        assert total_cardinality(tiny) == 64
        p = default_cfg.params
        assert total_cardinality(p) == 16 * (powmul(35, 12) * 60) ** 2

    def test_results_are_exact_ints(self):
        p = params(P_B=7, N_B=5, L_B=4, L_p=3)
        for fn in (pipeline_cardinality, conv_part_cardinality, reduction_cardinality,
                   structure_cardinality, cell_complexity, total_cardinality):
            assert type(fn(p)) is int

    def test_total_matches_enumeration(self, tiny_cfg):
        count = sum(1 for _ in enumerate_genomes(tiny_cfg.params))
        assert count == total_cardinality(tiny_cfg.params) == 64


class TestLoadConfig:
    def test_default_params(self, default_cfg):
        assert default_cfg.params == SpaceParams(
            L_c=2, N_c=2, P_c=2, L_p=3, L_B=4, N_B=5, P_B=7, L_r=3, N_r=3, P_r=2)
        assert default_cfg.total_param == 150000000
        assert default_cfg.input_shape == (28, 28, 1)
        assert len(default_cfg.head) == 3
        assert default_cfg.ea.population == 20
        assert default_cfg.ea.generations == 1000
        assert default_cfg.ea.crossover_eta == 3.0
        assert default_cfg.ea.mutation_eta == 3.0

    def test_empty_blocks_rejected(self, tiny_dict):
        tiny_dict["blocks"] = []
        with pytest.raises(ConfigError, match="blocks"):
            config_from_dict(tiny_dict)

    def test_missing_L_r_defaults_to_L_p(self, tiny_dict):
        del tiny_dict["layers"]["L_r"]
        del tiny_dict["layers"]["allow_mismatched_L_r"]
        cfg = config_from_dict(tiny_dict)
        assert cfg.params.L_r == cfg.params.L_p == 1

    def test_mismatched_L_r_needs_flag(self, tiny_dict):
        tiny_dict["layers"]["L_r"] = 5
        tiny_dict["layers"]["allow_mismatched_L_r"] = False
        with pytest.raises(ConfigError, match="L_r"):
            config_from_dict(tiny_dict)
        tiny_dict["layers"]["allow_mismatched_L_r"] = True
        assert config_from_dict(tiny_dict).params.L_r == 5

    def test_unknown_key_rejected(self, tiny_dict):
        tiny_dict["surprise"] = 1
        with pytest.raises(ConfigError, match="surprise"):
            config_from_dict(tiny_dict)

    def test_unknown_enum_tag_named(self, tiny_dict):
        tiny_dict["merge_modes"] = ["add", "average"]
        with pytest.raises(ConfigError, match="merge_modes"):
            config_from_dict(tiny_dict)

    def test_bad_ea_population(self, tiny_dict):
        tiny_dict["ea"]["population"] = 5
        with pytest.raises(ConfigError, match="population"):
            config_from_dict(tiny_dict)

    def test_derived_counts_follow_lists(self, default_cfg):
        p = default_cfg.params
        assert p.N_B == len(default_cfg.blocks) == 5
        assert p.P_B == len(default_cfg.block_options) == 7
        assert p.N_r == len(default_cfg.reduction_blocks) == 3
        assert p.P_r == len(default_cfg.merge_modes) == 2
        assert p.P_c == len(default_cfg.sampling_modes) == 2

    def test_skip_option_is_pure_identity(self, default_cfg):
        skip = default_cfg.block_options[0]
        assert skip.skip and not skip.batch_norm and skip.activation == "none"

    def test_malformed_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="malformed"):
            load_config(bad)

    def test_round_trip(self, tmp_path, default_cfg):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config_to_dict(default_cfg)), encoding="utf-8")
        assert load_config(path) == default_cfg
