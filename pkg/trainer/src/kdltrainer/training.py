"""Unsupervised training on the negative mean sum rate."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import torch

from .config import TransformerConfig
from .data import Dataset
from .model import DualParameterTransformer
from .physics import decode_and_rate


@dataclass
class TrainSettings:
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 3e-4
    grad_clip: float = 1.0
    seed: int = 0
    log_every: int = 25


@dataclass
class TrainResult:
    model: DualParameterTransformer
    loss_curve: list                 # (step, loss) pairs
    final_mean_rate: float
    diverged: bool = False
    eval_curve: list = field(default_factory=list)


def batch_sum_rates(model: DualParameterTransformer, users: torch.Tensor,
                    const) -> torch.Tensor:
    """(B,) sum rates for a batch of user layouts."""
    z = torch.cat([users[:, :, 0], users[:, :, 1]], dim=1)
    raw = model(z)
    rates, _, _ = decode_and_rate(model.split_raw(raw), users, const)
    return rates.sum(dim=1)


def mean_sum_rate(model: DualParameterTransformer, data: Dataset,
                  batch_size: int = 256) -> float:
    """Full-dataset mean sum rate without gradients."""
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(data), batch_size):
            users = data.users[i:i + batch_size]
            total += float(batch_sum_rates(model, users,
                                           data.constants).sum())
    return total / len(data)


def train(data: Dataset, config: TransformerConfig,
          settings: TrainSettings | None = None,
          stop_at_ratio: float | None = None) -> TrainResult:
    """Minibatch Adam on loss = -mean(sum rate).

    Deterministic per seed on a fixed backend.  Aborts on a non-finite
    loss, keeping the last good parameter state.  If stop_at_ratio is
    given, training stops early once the full-dataset mean sum rate
    reaches that multiple of the untrained model's mean.
    """
    settings = settings or TrainSettings()
    torch.manual_seed(settings.seed)
    model = DualParameterTransformer(config)
    optimizer = torch.optim.Adam(model.parameters(),
                                 lr=settings.learning_rate)
    generator = torch.Generator().manual_seed(settings.seed + 1)

    baseline = mean_sum_rate(model, data) if stop_at_ratio else None
    curve = []
    eval_curve = []
    last_good = {k: v.detach().clone() for k, v in model.state_dict().items()}
    diverged = False
    for step in range(1, settings.steps + 1):
        idx = torch.randint(0, len(data), (settings.batch_size,),
                            generator=generator)
        users = data.users[idx]
        loss = -batch_sum_rates(model, users, data.constants).mean()
        if not torch.isfinite(loss):
            model.load_state_dict(last_good)
            diverged = True
            break
        optimizer.zero_grad()
        loss.backward()
        if settings.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(),
                                           settings.grad_clip)
        optimizer.step()
        curve.append((step, loss.item()))
        if step % settings.log_every == 0:
            last_good = {k: v.detach().clone()
                         for k, v in model.state_dict().items()}
            if stop_at_ratio is not None:
                current = mean_sum_rate(model, data)
                eval_curve.append((step, current))
                if current >= stop_at_ratio * baseline:
                    break
    final = mean_sum_rate(model, data)
    return TrainResult(model=model, loss_curve=curve, final_mean_rate=final,
                       diverged=diverged, eval_curve=eval_curve)


def write_loss_curve(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in curve:
            writer.writerow([step, repr(float(loss))])


def save_checkpoint(model: DualParameterTransformer, path) -> None:
    torch.save({"config": model.config.to_dict(),
                "state_dict": model.state_dict()}, path)


def load_checkpoint(path) -> DualParameterTransformer:
    payload = torch.load(path, weights_only=False)
    model = DualParameterTransformer(TransformerConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
