"""Structure learning for binary r-wise Markov random fields, classical and
simulated-quantum (Durr-Hoyer maximum finding)."""

__version__ = "0.1.0"
