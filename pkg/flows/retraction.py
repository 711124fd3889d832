"""
Per-point projections of drifted structure values back onto their constraint sets.

Frames go to SO(3) by the polar factor; J is skew-symmetrized and then
polar-normalized, which for a skew matrix yields a skew orthogonal matrix and
hence J^2 = -I. Almost contact structures are handled through the lift

    Jhat = [[theta, xi], [-xi^T, 0]]

on R^{n+1}: (xi, theta) satisfy |xi| = 1, theta xi = 0 and theta^2 = -id + xi xi^T
exactly when Jhat is a complex structure.
"""

from typing import Tuple

import numpy as np

from infrastructure.errors import DimensionMismatch


def polar_rotation(m: np.ndarray) -> np.ndarray:
    """Nearest rotation (orthogonal, det +1) to each matrix of a batch."""
    n = m.shape[-1]
    u, _, vt = np.linalg.svd(m.reshape(-1, n, n))
    flip = np.linalg.det(u @ vt) < 0.0
    if np.any(flip):
        u[flip, :, -1] *= -1.0
    return (u @ vt).reshape(m.shape)


def polar_orthogonal(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    return u @ vt


def skew_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def retract_frames(frames: np.ndarray) -> np.ndarray:
    return polar_rotation(frames)


def retract_complex(j: np.ndarray) -> np.ndarray:
    """Skew-symmetrize, then take the polar factor."""
    return skew_part(polar_orthogonal(skew_part(j)))


def lift_contact(xi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Jhat = [[theta, xi], [-xi^T, 0]]."""
    n = xi.shape[-1]
    if theta.shape[-2:] != (n, n):
        raise DimensionMismatch(f"theta must be {n} x {n}")
    lifted = np.zeros(xi.shape[:-1] + (n + 1, n + 1))
    lifted[..., :n, :n] = theta
    lifted[..., :n, n] = xi
    lifted[..., n, :n] = -xi
    return lifted


def unlift_contact(lifted: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = lifted.shape[-1] - 1
    return lifted[..., :n, n].copy(), lifted[..., :n, :n].copy()


def retract_contact(xi: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalize xi, restrict theta to xi^perp, then retract the lift as a complex structure.
    """
    norm = np.linalg.norm(xi, axis=-1, keepdims=True)
    unit = xi / norm
    n = xi.shape[-1]
    proj = np.eye(n) - unit[..., :, None] * unit[..., None, :]
    restricted = proj @ theta @ proj
    return unlift_contact(retract_complex(lift_contact(unit, restricted)))


# ==================== Constraint drift ====================

def frame_drift(frames: np.ndarray) -> float:
    gram = np.swapaxes(frames, -1, -2) @ frames
    return float(np.max(np.abs(gram - np.eye(frames.shape[-1]))))


def complex_drift(j: np.ndarray) -> float:
    n = j.shape[-1]
    skew = np.max(np.abs(j + np.swapaxes(j, -1, -2)))
    square = np.max(np.abs(j @ j + np.eye(n)))
    return float(max(skew, square))


def contact_drift(xi: np.ndarray, theta: np.ndarray) -> float:
    return complex_drift(lift_contact(xi, theta))
