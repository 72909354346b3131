"""The two-branch placement network with ROI slicing.

A shared residual trunk maps the 6-channel (I_B, I_L) stack to a
``C x g x g`` feature map. The location branch reduces it to a ``g*g``
class map through dilated convolutions. The size branch applies one
dilated convolution, then slices a 3x3 window whose bottom-center sits at
the location cell, max-pools it globally, and classifies size through two
fully connected layers. During training the slice coordinate comes from
the ground-truth cell; at inference it comes from the predicted cell.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from composekit.geometry import GridCell
from composekit.net.config import NetworkConfig


class Bottleneck(nn.Module):
    """Residual bottleneck; stride 2 on the final 1x1 conv, projection shortcut."""

    def __init__(self, cin: int, c1: int, c2: int, c3: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, c1, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(c1)
        self.conv2 = nn.Conv2d(c1, c2, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c2)
        self.conv3 = nn.Conv2d(c2, c3, 1, stride=2, bias=False)
        self.bn3 = nn.BatchNorm2d(c3)
        self.proj = nn.Conv2d(cin, c3, 1, stride=2, bias=False)
        self.bn_proj = nn.BatchNorm2d(c3)

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = F.relu(self.bn2(self.conv2(y)))
        y = self.bn3(self.conv3(y))
        return F.relu(y + self.bn_proj(self.proj(x)))


class PlacementNet(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        g = config.grid_size
        d = config.dilation

        self.stem = nn.Conv2d(6, config.stem_channels, 7, stride=2, bias=False)
        self.stem_bn = nn.BatchNorm2d(config.stem_channels)
        cin = config.stem_channels
        blocks = []
        for c1, c2, c3 in config.block_channels:
            blocks.append(Bottleneck(cin, c1, c2, c3))
            cin = c3
        self.blocks = nn.ModuleList(blocks)

        self.loc_conv1 = nn.Conv2d(cin, config.loc_channels, 3, dilation=d, padding=d)
        self.loc_conv2 = nn.Conv2d(config.loc_channels, 1, 3, dilation=d, padding=d)

        self.size_conv = nn.Conv2d(cin, config.size_channels, 3, dilation=d, padding=d)
        self.fc1 = nn.Linear(config.size_channels, config.fc_hidden)
        self.fc2 = nn.Linear(config.fc_hidden, config.size_classes)

        self.grid_size = g
        # Records whether the last size forward sliced at ground-truth or
        # predicted cells; inspected by tests and training instrumentation.
        self.last_slice_source: str | None = None

    def trunk(self, x: torch.Tensor) -> torch.Tensor:
        x = F.max_pool2d(F.relu(self.stem_bn(self.stem(x))), 3, stride=2)
        for block in self.blocks:
            x = block(x)
        return x

    def location_logits(self, features: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.loc_conv1(features))
        return self.loc_conv2(x).flatten(1)

    def size_logits(self, features: torch.Tensor, cells: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.size_conv(features))
        window = roi_slice_batch(x, cells, self.grid_size)
        pooled = window.amax(dim=(2, 3))
        return self.fc2(F.relu(self.fc1(pooled)))

    def forward(self, x: torch.Tensor, cells: torch.Tensor | None = None):
        """Returns (location logits, size logits, cells used for slicing).

        Passing ``cells`` (ground-truth indices) selects training behavior;
        omitting it runs the two-stage cascade on the predicted argmax.
        """
        features = self.trunk(x)
        loc = self.location_logits(features)
        if cells is None:
            cells = loc.argmax(dim=1)
            self.last_slice_source = "predicted"
        else:
            self.last_slice_source = "ground-truth"
        size = self.size_logits(features, cells)
        return loc, size, cells


def build_network(config: NetworkConfig, seed: int = 0) -> PlacementNet:
    """Construct and initialize the network deterministically.

    Fan-in-scaled init everywhere; the two class-logit layers start near
    zero so an untrained model emits near-uniform distributions.
    """
    torch.manual_seed(seed)
    model = PlacementNet(config)
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Linear):
            nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
            nn.init.zeros_(module.bias)
    for head in (model.loc_conv2, model.fc2):
        nn.init.normal_(head.weight, std=1e-4)
        nn.init.zeros_(head.bias)
    return model


def roi_slice(feature_map, cell: GridCell):
    """Extract the 3x3 window whose bottom-center is ``cell``.

    Rows span [row-2, row] and columns [col-1, col+1]; indices falling
    outside the map are clamped to the edge (replication). Accepts a numpy
    array or tensor of shape (C, G, G) and returns the same type, (C, 3, 3).
    """
    is_numpy = isinstance(feature_map, np.ndarray)
    grid = feature_map.shape[-1]
    rows = np.clip(np.arange(cell.row - 2, cell.row + 1), 0, grid - 1)
    cols = np.clip(np.arange(cell.col - 1, cell.col + 2), 0, grid - 1)
    if is_numpy:
        return feature_map[:, rows[:, None], cols[None, :]]
    return feature_map[:, rows[:, None], cols[None, :]]


def roi_slice_batch(features: torch.Tensor, cells: torch.Tensor, grid: int) -> torch.Tensor:
    """Batched differentiable ROI slicing; ``cells`` holds flat indices."""
    b = features.shape[0]
    row = torch.div(cells, grid, rounding_mode="floor")
    col = cells % grid
    row_off = torch.arange(-2, 1, device=features.device)
    col_off = torch.arange(-1, 2, device=features.device)
    rows = (row.view(b, 1) + row_off.view(1, 3)).clamp_(0, grid - 1)
    cols = (col.view(b, 1) + col_off.view(1, 3)).clamp_(0, grid - 1)
    idx_b = torch.arange(b, device=features.device).view(b, 1, 1)
    window = features[idx_b, :, rows.view(b, 3, 1), cols.view(b, 1, 3)]
    return window.permute(0, 3, 1, 2)


def scene_to_tensor(ib: np.ndarray, il: np.ndarray) -> torch.Tensor:
    """Stack (I_B, I_L) into the 6-channel float input, scaled to [0, 1]."""
    stacked = np.concatenate([ib, il], axis=2).astype(np.float32) / 255.0
    return torch.from_numpy(stacked).permute(2, 0, 1)
