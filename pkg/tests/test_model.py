import math

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from composekit.geometry import GridCell
from composekit.net.config import NetworkConfig
from composekit.net.model import build_network, roi_slice, roi_slice_batch, scene_to_tensor

# Reference activation shapes for the default 6 x 480 x 480 input.
TABLE_SHAPES = {
    "stem": (64, 237, 237),
    "pool": (64, 118, 118),
    "block0": (128, 59, 59),
    "block1": (128, 30, 30),
    "block2": (512, 15, 15),
    "loc1": (64, 15, 15),
    "loc2": (1, 15, 15),
    "size_conv": (512, 15, 15),
    "roi": (512, 3, 3),
    "pooled": (512,),
    "size_out": (225,),
}


def walkthrough_shapes(model, x):
    """Trace every intermediate activation of one forward pass."""
    shapes = {}
    y = model.stem(x)
    shapes["stem"] = tuple(y.shape[1:])
    y = F.max_pool2d(F.relu(model.stem_bn(y)), 3, stride=2)
    shapes["pool"] = tuple(y.shape[1:])
    for i, block in enumerate(model.blocks):
        y = block(y)
        shapes[f"block{i}"] = tuple(y.shape[1:])
    loc = F.relu(model.loc_conv1(y))
    shapes["loc1"] = tuple(loc.shape[1:])
    loc = model.loc_conv2(loc)
    shapes["loc2"] = tuple(loc.shape[1:])
    s = F.relu(model.size_conv(y))
    shapes["size_conv"] = tuple(s.shape[1:])
    cell = torch.tensor([112])
    window = roi_slice_batch(s, cell, model.grid_size)
    shapes["roi"] = tuple(window.shape[1:])
    pooled = window.amax(dim=(2, 3))
    shapes["pooled"] = tuple(pooled.shape[1:])
    out = model.fc2(F.relu(model.fc1(pooled)))
    shapes["size_out"] = tuple(out.shape[1:])
    return shapes


class TestArchitectureShapes:
    def test_default_config_matches_reference_table(self):
        model = build_network(NetworkConfig(), seed=0).eval()
        with torch.no_grad():
            shapes = walkthrough_shapes(model, torch.randn(1, 6, 480, 480))
        assert shapes == TABLE_SHAPES

    def test_forward_output_shapes(self):
        model = build_network(NetworkConfig().scaled(16), seed=0).eval()
        with torch.no_grad():
            loc, size, cells = model(torch.randn(2, 6, 480, 480))
        assert loc.shape == (2, 225)
        assert size.shape == (2, 225)
        assert cells.shape == (2,)

    def test_tiny_config_grid5(self):
        cfg = NetworkConfig.tiny()
        assert cfg.trunk_spatial_sizes()[-1] == 5
        model = build_network(cfg, seed=1).eval()
        with torch.no_grad():
            loc, size, _ = model(torch.randn(1, 6, cfg.input_resolution, cfg.input_resolution))
        assert loc.shape == (1, 25) and size.shape == (1, 25)

    def test_inconsistent_resolution_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(input_resolution=300)

    def test_size_classes_must_match_grid(self):
        with pytest.raises(ValueError):
            NetworkConfig(size_classes=100)


class TestRoiSlice:
    def oracle(self, grid, cell):
        rows = [min(max(r, 0), grid - 1) for r in range(cell.row - 2, cell.row + 1)]
        cols = [min(max(c, 0), grid - 1) for c in range(cell.col - 1, cell.col + 2)]
        return rows, cols

    def test_interior_cell_window(self):
        fmap = np.arange(2 * 15 * 15, dtype=np.float64).reshape(2, 15, 15)
        out = roi_slice(fmap, GridCell(col=7, row=7))
        assert out.shape == (2, 3, 3)
        assert np.array_equal(out, fmap[:, 5:8, 6:9])

    def test_all_cells_match_index_oracle(self):
        grid = 15
        fmap = np.random.default_rng(0).normal(size=(3, grid, grid))
        for index in range(grid * grid):
            cell = GridCell.from_index(index)
            rows, cols = self.oracle(grid, cell)
            want = fmap[:, rows][:, :, cols]
            got = roi_slice(fmap, cell)
            assert np.array_equal(got, want), f"cell {index}"

    def test_corner_clamping(self):
        fmap = np.arange(15 * 15, dtype=np.float64).reshape(1, 15, 15)
        out = roi_slice(fmap, GridCell(col=0, row=0))
        # rows clamp to {0,0,0}; cols clamp to {0,0,1}
        assert np.array_equal(out[0], np.array([[0, 0, 1]] * 3, dtype=np.float64))

    def test_zero_map_gives_zero_slice(self):
        fmap = np.zeros((4, 15, 15))
        assert not roi_slice(fmap, GridCell(col=3, row=9)).any()

    def test_one_hot_lands_bottom_center(self):
        for index in (0, 7, 112, 224):
            cell = GridCell.from_index(index)
            fmap = np.zeros((1, 15, 15))
            fmap[0, cell.row, cell.col] = 1.0
            out = roi_slice(fmap, cell)
            assert out[0, 2, 1] == 1.0

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(1)
        fmap = rng.normal(size=(5, 15, 15)).astype(np.float32)
        t = torch.from_numpy(fmap).unsqueeze(0).repeat(4, 1, 1, 1)
        cells = torch.tensor([0, 14, 112, 224])
        batched = roi_slice_batch(t, cells, 15).numpy()
        for i, idx in enumerate(cells.tolist()):
            single = roi_slice(fmap, GridCell.from_index(idx))
            assert np.allclose(batched[i], single)


class TestInitialization:
    def test_untrained_loss_near_uniform(self):
        cfg = NetworkConfig().scaled(16)
        model = build_network(cfg, seed=0).eval()
        x = torch.randn(4, 6, 480, 480)
        with torch.no_grad():
            loc, size, _ = model(x, cells=torch.tensor([0, 50, 100, 224]))
            loss = (F.cross_entropy(loc, torch.tensor([1, 2, 3, 4]))
                    + F.cross_entropy(size, torch.tensor([5, 6, 7, 8]))).item()
        want = 2 * math.log(225)
        assert abs(loss - want) / want < 0.05

    def test_build_is_deterministic(self):
        a = build_network(NetworkConfig.tiny(), seed=3)
        b = build_network(NetworkConfig.tiny(), seed=3)
        for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
            assert ka == kb and torch.equal(va, vb)


def test_scene_to_tensor_layout():
    ib = np.full((8, 8, 3), 255, dtype=np.uint8)
    il = np.zeros((8, 8, 3), dtype=np.uint8)
    t = scene_to_tensor(ib, il)
    assert t.shape == (6, 8, 8)
    assert t[:3].max() == 1.0 and t[3:].max() == 0.0
