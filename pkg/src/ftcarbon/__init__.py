"""Energy and carbon accounting for machine-learning fine-tuning runs."""

__version__ = "0.1.0"
