"""
Core module for the harmonic flow simulator.
Contains configuration, errors, the exterior and G2 algebra, the grid calculus,
run configuration parsing, snapshots and the identity self-test.
"""

__version__ = "1.0.0"
