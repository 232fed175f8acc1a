"""Cooperative bystander photo privacy engine."""

__version__ = "0.1.0"
