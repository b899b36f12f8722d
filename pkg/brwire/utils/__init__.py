"""Defines package-wide utility functions."""
