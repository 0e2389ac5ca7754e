class PhenopipeError(Exception):
    """Base class for all pipeline errors."""
