"""Short-horizon PV energy forecasting from weather observations."""

__version__ = "0.1.0"
