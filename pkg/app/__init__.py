"""mrcap-bench: energy and power-capping benchmark for in-memory MapReduce mini-apps."""

__version__ = "0.1.0"
