"""Learned graph exploration: coverage-driven agents that map out mazes,
program behavior spaces, and app transition graphs."""

__version__ = "0.1.0"
