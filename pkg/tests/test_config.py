import pytest

from dockgame.config import ConfigError, load_config


def test_defaults_match_training_recipe():
    cfg = load_config(None)
    assert cfg.loop.learning_rate == 5e-5
    assert cfg.loop.epochs == 200
    assert cfg.loop.batch_size == 4
    assert cfg.loop.dropout == 0.1
    assert (cfg.loop.m_ligand, cfg.loop.n_ligand) == (2, 6)
    assert cfg.weights.alpha_cls == 1.0
    assert cfg.weights.alpha_center == 0.05
    assert cfg.weights.alpha2 == 50.0
    assert cfg.weights.beta == 15.0
    assert cfg.weights.gamma == 1.0
    assert cfg.graph.residue_cutoff == 8.0
    assert cfg.graph.interface_cutoff == 10.0
    assert cfg.net.tau == 1.0
    assert cfg.seed == 0
    assert cfg.jobs == 1


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[loop]\nepochs = 7\nlearning_rate = 0.01\n"
                    "[run]\nseed = 42\n")
    cfg = load_config(path)
    assert cfg.loop.epochs == 7
    assert cfg.loop.learning_rate == 0.01
    assert cfg.loop.batch_size == 4
    assert cfg.seed == 42


def test_cli_overrides_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\nseed = 42\njobs = 2\n")
    cfg = load_config(path, seed=7)
    assert cfg.seed == 7
    assert cfg.jobs == 2


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[loop]\nbogus_key = 1\n")
    with pytest.raises(ConfigError, match="bogus_key"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_config(path)


def test_unparseable_value_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[loop]\nepochs = soon\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_invalid_value_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[loop]\nlearning_rate = -1.0\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_tiny_preset_applies(tmp_path):
    cfg = load_config(None, tiny=True)
    assert cfg.net.layers_ligand == 2
    assert cfg.net.hidden_ligand == 32
    # non-architecture settings survive the preset
    path = tmp_path / "run.ini"
    path.write_text("[net]\ntau = 0.5\nd_l = 4\n")
    cfg = load_config(path, tiny=True)
    assert cfg.net.tau == 0.5
    assert cfg.net.d_l == 4
    assert cfg.net.hidden_ligand == 32


def test_bool_parsing(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[loop]\nexchange_uses_refined = yes\nsample_gumbel = 0\n")
    cfg = load_config(path)
    assert cfg.loop.exchange_uses_refined is True
    assert cfg.loop.sample_gumbel is False
    path.write_text("[loop]\nsample_gumbel = maybe\n")
    with pytest.raises(ConfigError):
        load_config(path)
