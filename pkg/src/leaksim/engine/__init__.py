"""Deterministic per-prefix BGP propagation engine.

Two interchangeable kernels implement the same semantics: a compiled
extension for large topologies and a pure-Python reference used as fallback
and for custom import-filter hooks. ``Simulation`` picks one at import time
(override with the ``LEAKSIM_BACKEND`` environment variable).
"""

from .types import Announcement, DivergenceError, Phase, RibEntry, sandwich_path
from .state import (
    RoutingState,
    converge,
    decide,
    export_targets,
    inject_export,
    loop_check,
    originate,
)
from .sim import Simulation, available_backends, default_backend

__all__ = [
    "Announcement",
    "DivergenceError",
    "Phase",
    "RibEntry",
    "RoutingState",
    "Simulation",
    "available_backends",
    "converge",
    "decide",
    "default_backend",
    "export_targets",
    "inject_export",
    "loop_check",
    "originate",
    "sandwich_path",
]
