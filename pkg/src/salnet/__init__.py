"""Sensitivity Adjustment Learning (SAL) for recurrent and deep feedforward networks."""

__version__ = "0.1.0"
