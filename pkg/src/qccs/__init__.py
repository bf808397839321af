"""Executable qCCS: a quantum process calculus toolkit."""

__version__ = "0.1.0"
