"""CLI, distributed-merge simulation and reference checks."""
