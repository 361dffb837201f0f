"""Graph-filtered federated learning with latency-aware round scheduling."""

__version__ = "0.1.0"
