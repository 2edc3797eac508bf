"""Exact diagram calculus and tail experiments for degenerate U-statistics
on finite probability spaces."""

__version__ = "0.1.0"
