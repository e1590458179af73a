"""Desk-scale simulator of a UAV sensing, communication, computation and control loop."""

__version__ = "0.1.0"
