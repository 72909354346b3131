from composekit.net.config import NetworkConfig
from composekit.net.model import PlacementNet, build_network, roi_slice, scene_to_tensor
from composekit.net.checkpoint import load_checkpoint, save_checkpoint
from composekit.net.inference import PlacementPrediction, predict, predict_multi
from composekit.net.training import TrainingDiverged, TrainSettings, train

__all__ = [
    "NetworkConfig",
    "PlacementNet",
    "build_network",
    "roi_slice",
    "scene_to_tensor",
    "load_checkpoint",
    "save_checkpoint",
    "PlacementPrediction",
    "predict",
    "predict_multi",
    "TrainingDiverged",
    "TrainSettings",
    "train",
]
