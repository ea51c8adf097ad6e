"""MAR-3D: pyramid occupancy VAE + cascaded masked auto-regressive shape generation."""

__version__ = "0.1.0"
