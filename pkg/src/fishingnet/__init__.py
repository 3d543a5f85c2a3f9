"""Top-down semantic grid perception and short-term prediction from lidar,
radar and camera inputs, with late fusion across modalities."""

__version__ = "0.1.0"
