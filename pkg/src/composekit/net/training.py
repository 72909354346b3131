"""Training loop for the placement network."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from composekit.net.model import PlacementNet, scene_to_tensor

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainSettings:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    optimizer: str = "sgd"  # "sgd" (momentum 0.9) or "adam"
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_step_epochs: int = 10
    lr_gamma: float = 0.5
    seed: int = 0
    # Stop once both heads reach this training top-1 accuracy (None: never).
    stop_at_accuracy: float | None = None


def train(
    model: PlacementNet,
    samples,
    settings: TrainSettings = TrainSettings(),
    log_path: str | Path | None = None,
) -> list[dict]:
    """Minimize the summed location/size cross-entropies over ``samples``.

    ROI slicing always uses the ground-truth cell during training. Returns
    one metrics row per epoch (plus an initial row measured before any
    update) and appends them as JSON lines to ``log_path`` when given.
    A non-finite loss aborts with :class:`TrainingDiverged`.
    """
    if len(samples) == 0:
        raise ValueError("training requires a non-empty sample stream")

    inputs, g_xy, g_wh = _materialize(samples)
    opt = _make_optimizer(model, settings)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=settings.lr_step_epochs, gamma=settings.lr_gamma)
    rng = np.random.default_rng(settings.seed)
    n = len(inputs)
    bs = min(settings.batch_size, n)

    metrics: list[dict] = [_evaluate(model, inputs, g_xy, g_wh, bs)]
    metrics[0].update(epoch=0, lr=settings.lr, seconds=0.0)
    _append_log(log_path, metrics[0])

    for epoch in range(1, settings.epochs + 1):
        t0 = time.time()
        model.train()
        order = rng.permutation(n)
        sums = {"loss": 0.0, "loc_loss": 0.0, "size_loss": 0.0}
        hits = {"loc_top1": 0, "loc_top5": 0, "size_top1": 0, "size_top5": 0}
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            x = torch.stack([inputs[i] for i in idx])
            yl = g_xy[idx]
            ys = g_wh[idx]
            opt.zero_grad()
            loc, size, _ = model(x, cells=yl)
            loc_loss = F.cross_entropy(loc, yl)
            size_loss = F.cross_entropy(size, ys)
            loss = loc_loss + size_loss
            if not math.isfinite(loss.item()):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch offset {start}: "
                    f"loc={loc_loss.item()}, size={size_loss.item()}"
                )
            loss.backward()
            opt.step()
            k = len(idx)
            sums["loss"] += loss.item() * k
            sums["loc_loss"] += loc_loss.item() * k
            sums["size_loss"] += size_loss.item() * k
            _accumulate_topk(hits, loc, yl, "loc")
            _accumulate_topk(hits, size, ys, "size")
        sched.step()

        row = {
            "epoch": epoch,
            **{k: v / n for k, v in sums.items()},
            **{k: v / n for k, v in hits.items()},
            "lr": opt.param_groups[0]["lr"],
            "seconds": round(time.time() - t0, 3),
        }
        metrics.append(row)
        _append_log(log_path, row)
        log.info("epoch %d loss %.4f loc_top1 %.3f size_top1 %.3f",
                 epoch, row["loss"], row["loc_top1"], row["size_top1"])

        target = settings.stop_at_accuracy
        if target is not None and row["loc_top1"] >= target and row["size_top1"] >= target:
            log.info("accuracy target %.2f reached at epoch %d; stopping", target, epoch)
            break

    model.eval()
    return metrics


def _materialize(samples):
    inputs = [scene_to_tensor(s.ib, s.il) for s in samples]
    g_xy = torch.tensor([s.g_xy for s in samples], dtype=torch.long)
    g_wh = torch.tensor([s.g_wh for s in samples], dtype=torch.long)
    return inputs, g_xy, g_wh


def _make_optimizer(model, settings: TrainSettings):
    if settings.optimizer == "adam":
        return torch.optim.Adam(model.parameters(), lr=settings.lr,
                                weight_decay=settings.weight_decay)
    if settings.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=settings.lr,
                               momentum=settings.momentum,
                               weight_decay=settings.weight_decay)
    raise ValueError(f"unknown optimizer: {settings.optimizer!r}")


def _accumulate_topk(hits, logits, targets, prefix):
    top5 = logits.topk(min(5, logits.shape[1]), dim=1).indices
    hits[f"{prefix}_top1"] += (top5[:, 0] == targets).sum().item()
    hits[f"{prefix}_top5"] += (top5 == targets.unsqueeze(1)).any(dim=1).sum().item()


@torch.no_grad()
def _evaluate(model, inputs, g_xy, g_wh, batch_size) -> dict:
    model.eval()
    n = len(inputs)
    sums = {"loss": 0.0, "loc_loss": 0.0, "size_loss": 0.0}
    hits = {"loc_top1": 0, "loc_top5": 0, "size_top1": 0, "size_top5": 0}
    for start in range(0, n, batch_size):
        idx = range(start, min(start + batch_size, n))
        x = torch.stack([inputs[i] for i in idx])
        yl = g_xy[list(idx)]
        ys = g_wh[list(idx)]
        loc, size, _ = model(x, cells=yl)
        k = len(x)
        sums["loss"] += (F.cross_entropy(loc, yl) + F.cross_entropy(size, ys)).item() * k
        sums["loc_loss"] += F.cross_entropy(loc, yl).item() * k
        sums["size_loss"] += F.cross_entropy(size, ys).item() * k
        _accumulate_topk(hits, loc, yl, "loc")
        _accumulate_topk(hits, size, ys, "size")
    return {**{k: v / n for k, v in sums.items()}, **{k: v / n for k, v in hits.items()}}


def _append_log(path, row) -> None:
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(json.dumps(row) + "\n")
