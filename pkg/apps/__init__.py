"""Command-line applications."""

__all__ = []
