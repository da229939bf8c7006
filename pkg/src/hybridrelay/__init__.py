"""Hybrid active/passive relay network: throughput model, monotonic lower bound, H-DDPG agent."""

__version__ = "0.1.0"
