"""Test suite for the Toeplitz constraints toolkit."""

__all__ = []
