"""leaksim: deterministic AS-level BGP route-leak simulation and analysis."""

__version__ = "0.1.0"
