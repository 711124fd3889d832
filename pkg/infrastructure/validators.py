# infrastructure/validators.py
"""
Constraint and series validation for the harmonic flow simulator.

This module provides:
- Pointwise constraint checks of frames, almost complex and almost contact
  structures and of the metric induced by G2 fields
- Sanity checks of diagnostics series before the bound checks run
"""

from typing import Sequence, Tuple

import numpy as np


class StructureValidator:
    """Validates structure values against their constraint sets."""

    DEFAULT_TOL = 1e-10

    def __init__(self, tol: float = DEFAULT_TOL):
        self.tol = tol

    def _result(self, drift: float, what: str) -> Tuple[bool, str]:
        if not np.isfinite(drift):
            return False, f"{what}: non-finite values"
        if drift > self.tol:
            return False, f"{what}: constraint drift {drift:.3e} exceeds {self.tol:.1e}"
        return True, ""

    def validate_frames(self, frames: np.ndarray) -> Tuple[bool, str]:
        """
        Check that every 3 x 3 matrix is orthonormal.

        Args:
            frames: Array [..., 3, 3]

        Returns:
            Tuple of (is_valid, error_message)
        """
        gram = np.swapaxes(frames, -1, -2) @ frames
        return self._result(float(np.max(np.abs(gram - np.eye(frames.shape[-1])))), "frames not orthonormal")

    def validate_complex(self, j: np.ndarray) -> Tuple[bool, str]:
        """Check J^T = -J and J^2 = -I pointwise."""
        n = j.shape[-1]
        drift = max(float(np.max(np.abs(j + np.swapaxes(j, -1, -2)))),
                    float(np.max(np.abs(j @ j + np.eye(n)))))
        return self._result(drift, "J not skew-orthogonal")

    def validate_contact(self, xi: np.ndarray, theta: np.ndarray) -> Tuple[bool, str]:
        """Check |xi| = 1, theta skew and theta^2 = -id + xi xi^T pointwise."""
        n = xi.shape[-1]
        unit = float(np.max(np.abs(np.linalg.norm(xi, axis=-1) - 1.0)))
        skew = float(np.max(np.abs(theta + np.swapaxes(theta, -1, -2))))
        outer = xi[..., :, None] * xi[..., None, :]
        square = float(np.max(np.abs(theta @ theta + np.eye(n) - outer)))
        return self._result(max(unit, skew, square), "(xi, theta) off the almost contact constraint")

    def validate_metric_drift(self, drift: float, drift_tol: float) -> Tuple[bool, str]:
        """G2 fields only need the induced metric to stay within drift_tol of the identity."""
        if not np.isfinite(drift):
            return False, "G2 metric: non-finite values"
        if drift >= drift_tol:
            return False, f"G2 metric drift {drift:.3e} exceeds drift_tol {drift_tol:.1e}"
        return True, ""


class SeriesValidator:
    """Validates diagnostics series before the bound checks."""

    MIN_SAMPLES = 3

    def validate_times(self, times: Sequence[float], min_samples: int = MIN_SAMPLES) -> Tuple[bool, str]:
        """
        Check sample count, finiteness and strictly increasing times.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if len(times) < min_samples:
            return False, f"series has {len(times)} samples, at least {min_samples} required"
        t = np.asarray(times, dtype=float)
        if not np.all(np.isfinite(t)):
            return False, "series times must be finite"
        if np.any(np.diff(t) <= 0.0):
            return False, "series times must be strictly increasing"
        return True, ""
