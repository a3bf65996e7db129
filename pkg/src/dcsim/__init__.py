"""Discrete-event simulator for QUIC-like transfers over PDCP dual connectivity."""

__version__ = "0.1.0"
