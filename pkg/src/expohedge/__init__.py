"""Monte Carlo learning of exponential-utility hedges and indifference prices."""

__version__ = "0.1.0"
