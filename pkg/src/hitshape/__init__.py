"""Hitting times of gap diffusions: exact laws, factorization and shape."""

__version__ = "0.1.0"
