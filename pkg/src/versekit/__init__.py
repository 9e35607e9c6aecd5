"""Scripture corpus tooling: versification, extraction, cleaning, alignment, metrics and benchmark tasks."""

__version__ = "0.1.0"
