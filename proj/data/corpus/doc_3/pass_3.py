"""A tiny counter type."""


class Counter:
    """Counts events by name."""

    def __init__(self):
        """Start with an empty tally."""
        self.tally = {}

    def add(self, name):
        """Record one event under name."""
        self.tally[name] = self.tally.get(name, 0) + 1
