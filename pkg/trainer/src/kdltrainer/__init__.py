"""Attention model predicting dual-form beamforming parameters."""

from .config import TransformerConfig
from .data import Dataset, load_dataset
from .model import DualParameterTransformer, sinusoidal_positions
from .physics import ScenarioConstants, decode_and_rate
from .training import TrainSettings, mean_sum_rate, train

__all__ = ["TransformerConfig", "Dataset", "load_dataset",
           "DualParameterTransformer", "sinusoidal_positions",
           "ScenarioConstants", "decode_and_rate", "TrainSettings",
           "mean_sum_rate", "train"]
