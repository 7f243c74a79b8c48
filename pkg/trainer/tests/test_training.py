import numpy as np
import torch

from kdltrainer import (DualParameterTransformer, TransformerConfig,
                        TrainSettings, mean_sum_rate, train)
from kdltrainer.training import load_checkpoint, save_checkpoint, write_loss_curve


def _config(**kwargs):
    base = dict(n_users=2, n_waveguides=2, pas_per_waveguide=4,
                n_model=64, n_heads=4)
    base.update(kwargs)
    return TransformerConfig(**base)


def test_short_training_improves(toy_data):
    data = toy_data["dataset"]
    cfg = _config()
    torch.manual_seed(0)
    baseline = mean_sum_rate(DualParameterTransformer(cfg), data)
    res = train(data, cfg, TrainSettings(steps=150, seed=0),
                stop_at_ratio=1.2)
    assert not res.diverged
    assert res.final_mean_rate >= 1.2 * baseline
    assert all(np.isfinite(l) for _, l in res.loss_curve)


def test_training_deterministic(toy_data):
    data = toy_data["dataset"]
    cfg = _config(n_model=32)
    a = train(data, cfg, TrainSettings(steps=10, seed=3))
    b = train(data, cfg, TrainSettings(steps=10, seed=3))
    assert [l for _, l in a.loss_curve] == [l for _, l in b.loss_curve]
    c = train(data, cfg, TrainSettings(steps=10, seed=4))
    assert [l for _, l in a.loss_curve] != [l for _, l in c.loss_curve]


def test_divergence_keeps_last_good_state(toy_data):
    data = toy_data["dataset"]
    cfg = _config(n_model=32)
    # an absurd unclipped step size sends the heads into overflow
    res = train(data, cfg, TrainSettings(steps=60, learning_rate=1e9,
                                         grad_clip=0.0, seed=5, log_every=5))
    assert res.diverged
    assert np.isfinite(res.final_mean_rate)
    for p in res.model.parameters():
        assert torch.isfinite(p).all()


def test_loss_curve_file(toy_data, tmp_path):
    data = toy_data["dataset"]
    res = train(data, _config(n_model=32), TrainSettings(steps=5, seed=1))
    path = tmp_path / "curve.csv"
    write_loss_curve(res.loss_curve, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 6


def test_checkpoint_roundtrip(toy_data, tmp_path):
    data = toy_data["dataset"]
    cfg = _config(n_model=32)
    res = train(data, cfg, TrainSettings(steps=5, seed=2))
    path = tmp_path / "model.pt"
    save_checkpoint(res.model, path)
    loaded = load_checkpoint(path)
    z = data.features[:4]
    with torch.no_grad():
        assert torch.allclose(loaded(z), res.model(z))
    assert loaded.config.to_dict() == cfg.to_dict()
