"""metrichuman - metric-scale camera and human trajectories from monocular video."""

__version__ = "0.1.0"
__description__ = "Human-aware metric SLAM and scene-aware body denoising"
