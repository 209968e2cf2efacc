"""Two-stage threat evaluation and weapon assignment."""

__version__ = "0.1.0"
