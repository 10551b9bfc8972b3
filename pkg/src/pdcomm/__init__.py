"""Binary coherent-state communication over Gaussian phase-diffusion channels."""

__version__ = "0.1.0"
