"""rtlock: key-based RTL locking and generation-leakage evaluation toolkit."""

__version__ = "0.1.0"
