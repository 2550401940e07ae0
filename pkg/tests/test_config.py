import json

import pytest

from mtd.config import ExperimentConfig, load_config
from mtd.dataset import SyntheticSpec
from mtd.errors import ConfigError


def _write(tmp_path, data):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data))
    return path


def test_load_partial_file_keeps_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, {"synthetic": {"n_samples": 50}, "train": {"alpha": 0.2}, "repeats": 3}))
    assert cfg.synthetic.n_samples == 50
    assert cfg.synthetic.view_dims == SyntheticSpec().view_dims
    assert cfg.train.alpha == 0.2
    assert cfg.train.beta == 0.4
    assert cfg.seeds() == [0, 1, 2]
    cfg.validate()


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="learning_rat"):
        load_config(_write(tmp_path, {"train": {"learning_rat": 0.1}}))
    with pytest.raises(ConfigError, match="epochz"):
        load_config(_write(tmp_path, {"epochz": 3}))


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


def test_source_required():
    with pytest.raises(ConfigError, match="source"):
        ExperimentConfig().validate()
    ExperimentConfig().validate(need_source=False)


def test_invalid_sections_become_config_errors():
    cfg = ExperimentConfig(data_dir="somewhere")
    with pytest.raises(ConfigError):
        cfg.with_overrides(**{"incompleteness.view_missing_rate": 1.5}).validate()
    with pytest.raises(ConfigError):
        cfg.with_overrides(**{"model.hidden_activation": "tanh"}).validate()
    with pytest.raises(ConfigError):
        cfg.with_overrides(repeats=0).validate()


def test_overrides_skip_none_and_do_not_mutate():
    base = ExperimentConfig(data_dir="d")
    cfg = base.with_overrides(**{"train.alpha": 0.7, "train.beta": None, "split.train_ratio": 0.5})
    assert cfg.train.alpha == 0.7
    assert cfg.train.beta == base.train.beta
    assert cfg.split.train_ratio == 0.5
    assert base.train.alpha == 0.4
    assert base.split.train_ratio == 0.7


def test_unknown_override():
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(**{"train.nope": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(**{"synthetic.n_samples": 10})


def test_dict_round_trip():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_samples=80), repeats=2, workers=2)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
