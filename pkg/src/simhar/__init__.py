"""Synthetic motion to virtual IMU pipeline with contrastive text-motion pretraining."""

__version__ = "0.1.0"
