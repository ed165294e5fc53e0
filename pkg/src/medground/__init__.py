"""Desk-scale medical phrase grounding with anatomical pre-training."""

__version__ = "0.1.0"
