"""packlab: parameter-space exploration for a stochastic loose-packing model."""

__version__ = "0.1.0"
