"""Decoder-energy benchmarking harness for VVC coding-tool profiles."""

__version__ = "0.1.0"
