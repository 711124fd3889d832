"""
Flows module for the harmonic flow simulator.
Contains the flow state definitions, per-kind structure models, time stepping,
initial conditions, diagnostics and the LangGraph run pipeline.
"""

__version__ = "1.0.0"
