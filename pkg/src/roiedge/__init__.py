"""RoI-based device-to-edge offloading: CAM localization, rate policy and a frame-stepped simulator."""
from __future__ import annotations

import os

from .kernels import BACKEND

__version__ = "0.1.0"


def bundled_scenario() -> str:
    """Directory of the shipped 60-frame scenario (its config.json lives there)."""
    return os.path.join(os.path.dirname(__file__), "data", "scenario60")


__all__ = ["BACKEND", "bundled_scenario", "__version__"]
