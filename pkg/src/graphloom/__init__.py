"""Schema-to-model compiler and training engine for entity-relationship data."""

__version__ = "0.1.0"
