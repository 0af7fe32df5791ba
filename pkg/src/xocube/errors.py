"""Shared exception root so callers can catch any package error uniformly."""


class XocubeError(Exception):
    """Base class for every error this package raises on purpose."""
