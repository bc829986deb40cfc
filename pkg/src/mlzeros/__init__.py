"""Likelihood equations of algebraic statistical models with data zeros."""

__version__ = "0.1.0"
