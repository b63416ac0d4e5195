"""Synthetic fixed-outline floorplan benchmarks: generation, I/O, metrics, SA baseline."""

__version__ = "0.1.0"
