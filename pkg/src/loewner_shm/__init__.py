"""Loewner-framework MIMO modal identification and modal damage indices."""

__version__ = "0.1.0"
