"""t-PNG growth simulator and verification laboratory."""

__version__ = "0.1.0"
