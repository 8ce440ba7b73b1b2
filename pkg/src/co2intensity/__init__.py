"""Time-dependent CO2 intensities of multi-modal energy systems with storage."""

__version__ = "0.1.0"
