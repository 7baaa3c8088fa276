"""Language modeling tools for very large vocabularies."""

__version__ = "0.1.0"
