"""Utilities for trimming text."""


def shorten(text, width):
    """Trim text to the given width."""
    return text[:width]
