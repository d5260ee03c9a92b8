"""Experiment-to-simulation workflow engine for materials characterization."""

__version__ = "0.1.0"
