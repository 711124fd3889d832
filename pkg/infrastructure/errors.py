"""
Exception hierarchy for the harmonic flow simulator.

This module provides:
- Algebra errors (dimension and degree mismatches, degenerate 3-forms)
- Flow errors raised by the time stepper (CFL, constraint, finiteness)
- Diagnostics and configuration errors

The CLI maps FlowError subclasses to exit code 1 and ConfigError to exit code 2.
"""


class HarmonicFlowError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(HarmonicFlowError, ValueError):
    """Operands live on different base dimensions or shapes."""


class DegreeOverflow(HarmonicFlowError, ValueError):
    """Form degree is negative or exceeds the base dimension."""


class NonPositiveForm(HarmonicFlowError, ValueError):
    """A 3-form does not induce a positive definite metric."""


class ConventionError(HarmonicFlowError, RuntimeError):
    """A G2 identity constant failed its startup check."""


class FlowError(HarmonicFlowError, RuntimeError):
    """Runtime failure while advancing a flow."""


class ConstraintViolation(FlowError, ValueError):
    """A structure field is off its constraint set on input."""


class MetricDrift(FlowError):
    """The metric induced by a G2 field drifted beyond drift_tol."""


class CflViolation(FlowError):
    """The requested timestep exceeds the explicit stability bound."""


class ConstraintBlowup(FlowError):
    """Pre-retraction constraint drift exceeded repair_tol."""


class NonFinite(FlowError):
    """The field acquired NaN or infinite values."""


class TooShortSeries(HarmonicFlowError, ValueError):
    """A diagnostics series has too few samples for the requested check."""


class ConfigError(HarmonicFlowError, ValueError):
    """A run configuration could not be parsed or validated."""
