"""Steady-state learning in extensive-form games with terminal-node partitions."""

__version__ = "0.1.0"
