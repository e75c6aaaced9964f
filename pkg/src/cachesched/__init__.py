"""Trace-driven cache-reuse scheduling for diffusion-model inference."""

__version__ = "0.1.0"
