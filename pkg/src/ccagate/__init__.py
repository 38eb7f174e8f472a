"""Simulation of a geometric-phase controlled-U gate for two atoms in fiber-coupled cavities."""

__version__ = "0.1.0"

from .model import SystemParams
from .protocol import extract_gate, run_protocol, target_gate, theta_of_g, total_gate_time

__all__ = ["SystemParams", "extract_gate", "run_protocol", "target_gate", "theta_of_g",
           "total_gate_time", "__version__"]
