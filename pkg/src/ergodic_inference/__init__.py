"""Recurrence-time estimators for stationary ergodic time series."""

__version__ = "0.1.0"
