"""Lazy open quantum walks on Z^d: exact evolution, trajectories and CLT analytics."""
