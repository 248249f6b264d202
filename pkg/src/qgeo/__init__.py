"""Geodesic distances and embeddings of point clouds from wavepacket dynamics on graph Laplacians."""

from .dataset import Dataset, PipelineConfig, load_config, load_dataset, save_config, save_dataset
from .errors import QGeoError, ValidationError

__all__ = ["Dataset", "PipelineConfig", "QGeoError", "ValidationError", "load_config",
           "load_dataset", "save_config", "save_dataset"]
__version__ = "0.1.0"
