"""Free-space QKD channel statistics and finite-key secret-key-rate simulator."""
__version__ = "0.1.0"
