"""Exact Gamma-calculus verification and Stein-bound experiments for Markov chaos."""

__version__ = "0.1.0"
