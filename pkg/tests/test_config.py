import pytest

from signet.config import MODEL_KINDS, TrainConfig
from signet.errors import ConfigError


def test_defaults_are_valid_and_desk_scale():
    cfg = TrainConfig().validate()
    assert (cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.regularization, cfg.patience) == (50, 256, 1e-2, 1e-2, 5)
    assert (cfg.grad_norm, cfg.ap_k, cfg.cp_k, cfg.n_bases) == (1.0, 20, 500, 4)


def test_text_round_trip_and_digest():
    cfg = TrainConfig(model="transe", hidden_dimensions=(16, 8, 4, 4), cl_enabled=True, learning_rate=3e-3)
    back = TrainConfig.from_text(cfg.to_text())
    assert back == cfg and back.digest() == cfg.digest()
    assert cfg.digest() != cfg.replace(seed=1).digest()


def test_file_values_override_defaults_and_comments(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# comment\nmodel = rgcn\n\ncl_enabled=on\nhidden_dimensions=[64, 32]\n")
    cfg = TrainConfig.from_file(path)
    assert (cfg.model, cfg.cl_enabled, cfg.hidden_dimensions) == ("rgcn", True, (64, 32))


def test_problems_are_reported_together():
    cfg = TrainConfig(model="bionet", patience=0, learning_rate=-1.0, split_ratios=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    text = str(info.value)
    for key in ("model", "patience", "learning_rate", "split_ratios"):
        assert key in text
    assert all(kind in text for kind in MODEL_KINDS)


def test_unknown_and_malformed_keys():
    with pytest.raises(ConfigError, match="unknown configuration key"):
        TrainConfig.from_text("colour=blue\n")
    with pytest.raises(ConfigError, match="epochs"):
        TrainConfig.from_text("epochs=many\n")
    with pytest.raises(ConfigError, match="line 1"):
        TrainConfig.from_text("epochs\n")
