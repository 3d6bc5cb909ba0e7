"""Dependency-aware task offloading for mobile edge computing: workload DAGs,
AHP priorities, a discrete-time cluster simulator, metric kernels, and
learning-based offloading agents on a small numpy neural-network core."""

__version__ = "0.1.0"
