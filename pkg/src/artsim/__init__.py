"""Simulator for the ART range-query overlay: a level range tree of clusters
with random spine routing, plus a benchmark harness and CLI."""

__version__ = "0.1.0"
