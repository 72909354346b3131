"""Network configuration and the trunk's shape arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field


def _default_blocks():
    return ((64, 64, 128), (64, 64, 128), (128, 128, 512))


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; defaults reproduce the reference table.

    The trunk downsamples via a 7x7/stride-2 stem (no padding), a 3x3
    stride-2 max pool, and three bottleneck blocks whose last 1x1 conv has
    stride 2, so only input resolutions whose arithmetic lands exactly on
    ``grid_size`` are accepted.
    """

    input_resolution: int = 480
    grid_size: int = 15
    stem_channels: int = 64
    block_channels: tuple = field(default_factory=_default_blocks)
    loc_channels: int = 64
    size_channels: int = 512
    fc_hidden: int = 512
    dilation: int = 2
    size_classes: int = 225

    def __post_init__(self):
        if self.num_classes != self.grid_size ** 2:
            raise ValueError("location classes must equal grid_size^2")
        if self.size_classes != self.grid_size ** 2:
            raise ValueError(
                f"size_classes ({self.size_classes}) must equal grid_size^2 "
                f"({self.grid_size ** 2})"
            )
        if len(self.block_channels) != 3 or any(len(b) != 3 for b in self.block_channels):
            raise ValueError("block_channels must be three (c1, c2, c3) triples")
        spatial = self.trunk_spatial_sizes()
        if spatial[-1] != self.grid_size:
            raise ValueError(
                f"input resolution {self.input_resolution} yields trunk output "
                f"{spatial[-1]}, expected grid size {self.grid_size} "
                f"(per-stage sizes: {spatial})"
            )

    @property
    def num_classes(self) -> int:
        return self.grid_size ** 2

    @property
    def trunk_channels(self) -> int:
        return self.block_channels[-1][-1]

    def trunk_spatial_sizes(self) -> list[int]:
        """Spatial side length after stem conv, pool, and each block."""
        r = self.input_resolution
        sizes = []
        r = (r - 7) // 2 + 1  # 7x7 stem, stride 2, no padding
        sizes.append(r)
        r = (r - 3) // 2 + 1  # 3x3 max pool, stride 2
        sizes.append(r)
        for _ in self.block_channels:
            r = (r - 1) // 2 + 1  # strided 1x1 at the block end
            sizes.append(r)
        return sizes

    def scaled(self, divisor: int) -> "NetworkConfig":
        """Thinner variant: all channel widths divided, geometry unchanged."""
        w = lambda c: max(2, c // divisor)
        return NetworkConfig(
            input_resolution=self.input_resolution,
            grid_size=self.grid_size,
            stem_channels=w(self.stem_channels),
            block_channels=tuple(tuple(w(c) for c in b) for b in self.block_channels),
            loc_channels=w(self.loc_channels),
            size_channels=w(self.size_channels),
            fc_hidden=w(self.fc_hidden),
            dilation=self.dilation,
            size_classes=self.size_classes,
        )

    @classmethod
    def tiny(cls) -> "NetworkConfig":
        """Minimal configuration for gradient checks: grid 5, channels <= 8."""
        return cls(
            input_resolution=160,
            grid_size=5,
            stem_channels=4,
            block_channels=((2, 2, 4), (2, 2, 4), (4, 4, 8)),
            loc_channels=4,
            size_channels=8,
            fc_hidden=8,
            size_classes=25,
        )

    def to_dict(self) -> dict:
        return {
            "input_resolution": self.input_resolution,
            "grid_size": self.grid_size,
            "stem_channels": self.stem_channels,
            "block_channels": [list(b) for b in self.block_channels],
            "loc_channels": self.loc_channels,
            "size_channels": self.size_channels,
            "fc_hidden": self.fc_hidden,
            "dilation": self.dilation,
            "size_classes": self.size_classes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        data = dict(data)
        data["block_channels"] = tuple(tuple(b) for b in data["block_channels"])
        return cls(**data)
