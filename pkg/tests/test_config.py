import json

import pytest

from eigenclosure.config import PRESETS, RunConfig, apply_overrides, load_config


class TestPresets:
    def test_defaults_are_full_scale(self):
        cfg = load_config()
        assert cfg.preset == "paper" and cfg.case == "frade"
        assert (cfg.sampler.n_steps, cfg.sampler.burn_in) == (300_000, 100_000)
        assert (cfg.data.n_obs, cfg.data.t_obs, cfg.data.sigma) == (512, 0.5, 0.005)
        assert cfg.sensitivity.threshold == 1e-4

    def test_desk_frade(self):
        cfg = load_config(preset="desk")
        assert (cfg.sampler.n_steps, cfg.sampler.burn_in) == (50_000, 10_000)

    def test_paper_hifi(self):
        cfg = load_config(preset="paper", case="hifi")
        assert (cfg.hifi.n_x, cfg.hifi.n_y, cfg.hifi.n_members) == (512, 64, 576)
        assert cfg.model.n_points == 512

    def test_desk_hifi(self):
        cfg = load_config(preset="desk", case="hifi")
        assert (cfg.hifi.n_x, cfg.hifi.n_y, cfg.hifi.n_members) == (256, 32, 64)
        assert cfg.hifi.t_obs == 0.4

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            load_config(preset="huge")

    def test_every_preset_builds(self):
        for preset, cases in PRESETS.items():
            for case in cases:
                assert load_config(preset=preset, case=case).case == case


class TestFiles:
    def test_toml_layering(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('case = "frade"\nseed = 4\n[data]\nseries_kind = "time"\nn_obs = 32\n'
                        '[sampler]\nn_steps = 2000\n')
        cfg = load_config(path, preset="desk", seed=9)
        assert cfg.seed == 9  # explicit override wins over the file
        assert cfg.data.series_kind == "time" and cfg.data.n_obs == 32
        assert cfg.sampler.n_steps == 2000
        assert cfg.sampler.burn_in == 10_000  # from the preset

    def test_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"prior": {"nu_max": 2.5}}))
        assert load_config(path).prior.nu_max == 2.5

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"sampler": {"steps": 10}}))
        with pytest.raises(ValueError, match="unknown keys"):
            load_config(path)
        path.write_text(json.dumps({"colour": "red"}))
        with pytest.raises(ValueError, match="unknown config keys"):
            load_config(path)

    def test_bad_suffix(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("a: 1\n")
        with pytest.raises(ValueError):
            load_config(path)


class TestValidation:
    def test_round_trip(self):
        cfg = load_config(preset="desk", case="hifi")
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_hifi_grid_mismatch(self):
        with pytest.raises(ValueError, match="n_points"):
            RunConfig.from_dict({"case": "hifi", "model": {"n_points": 128}})

    def test_bad_series_kind(self):
        with pytest.raises(ValueError):
            RunConfig.from_dict({"data": {"series_kind": "both"}})

    def test_apply_overrides(self):
        cfg = apply_overrides(load_config(), seed=3, out=None)
        assert cfg.seed == 3 and cfg.out == "run"
