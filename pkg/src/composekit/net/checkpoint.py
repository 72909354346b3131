"""Checkpoint archive: a zip of named weight tensors plus a JSON header."""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from composekit.net.config import NetworkConfig
from composekit.net.model import PlacementNet


def save_checkpoint(path: str | Path, model: PlacementNet, seed: int = 0,
                    extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "config": model.config.to_dict(),
        "seed": seed,
        "extra": extra or {},
    }
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("config.json", json.dumps(header, indent=2))
        zf.writestr("weights.npz", buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[PlacementNet, dict]:
    """Rebuild the model from an archive; returns (model, header)."""
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("config.json"))
        with np.load(io.BytesIO(zf.read("weights.npz"))) as npz:
            state = {k: torch.from_numpy(npz[k]) for k in npz.files}
    config = NetworkConfig.from_dict(header["config"])
    model = PlacementNet(config)
    model.load_state_dict(state)
    model.eval()
    return model, header
