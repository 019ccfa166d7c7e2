"""Multi-person 3D motion forecasting kit."""

__version__ = "0.1.0"
