"""Project engine: stores projects of source files, syncs them into working
directories, runs make under resource limits, and serves the results."""

__version__ = "0.1.0"
