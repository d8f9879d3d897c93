"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration. ``key`` names the offending parameter."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(RuntimeError):
    """A numerical routine failed (eigensolver non-convergence, invalid fit, ...)."""
