"""Wind farm + pumped-hydro storage profit optimization for two-settlement markets."""

__version__ = "0.1.0"
