"""
Periodic finite-difference calculus on flat tori and the homogeneous S^3 model.

This module provides:
- GridSpec: axis sizes, lengths and spacing with an active-axis mask
- Scalar, vector, matrix and form fields over a grid
- Central-difference partials, the composed Laplacian and the divergence
- Midpoint quadrature
- The Hopf-homogeneous frame model on the unit S^3 (torsion, tension, energy)

Field values keep the grid axes first and the component axes last,
row-major, so `values.shape == grid.sizes + component_shape`.
Axes with a single point are inactive: fields are constant along them and
their partial derivative is identically zero.
"""

from math import comb, pi, prod
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from infrastructure.errors import DimensionMismatch


S3_VOLUME = 2.0 * pi ** 2


class GridSpec(BaseModel):
    """
    Uniform periodic grid on the flat torus prod_i [0, L_i).

    Lengths default to 2*pi on every axis.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, le=8, description="Base dimension")
    sizes: Tuple[int, ...] = Field(description="Points per axis")
    lengths: Optional[Tuple[float, ...]] = Field(default=None, description="Axis periods")

    @model_validator(mode="after")
    def check_axes(self) -> "GridSpec":
        if len(self.sizes) != self.n:
            raise ValueError(f"expected {self.n} axis sizes, got {len(self.sizes)}")
        if any(s < 1 for s in self.sizes):
            raise ValueError(f"axis sizes must be >= 1, got {self.sizes}")
        if self.lengths is not None:
            if len(self.lengths) != self.n:
                raise ValueError(f"expected {self.n} axis lengths, got {len(self.lengths)}")
            if any(not (length > 0.0) for length in self.lengths):
                raise ValueError(f"axis lengths must be positive, got {self.lengths}")
        return self

    @classmethod
    def torus(cls, sizes, lengths=None) -> "GridSpec":
        sizes = tuple(int(s) for s in sizes)
        return cls(n=len(sizes), sizes=sizes,
                   lengths=None if lengths is None else tuple(float(x) for x in lengths))

    @property
    def axis_lengths(self) -> Tuple[float, ...]:
        return self.lengths if self.lengths is not None else (2.0 * pi,) * self.n

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(length / size for length, size in zip(self.axis_lengths, self.sizes))

    @property
    def active(self) -> Tuple[bool, ...]:
        return tuple(size > 1 for size in self.sizes)

    @property
    def active_axes(self) -> Tuple[int, ...]:
        return tuple(i for i, on in enumerate(self.active) if on)

    @property
    def n_active(self) -> int:
        return len(self.active_axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.sizes

    @property
    def n_points(self) -> int:
        return prod(self.sizes)

    @property
    def cell_volume(self) -> float:
        return prod(self.spacing)

    @property
    def volume(self) -> float:
        return prod(self.axis_lengths)

    @property
    def h_min(self) -> float:
        """Smallest spacing over active axes (inf when every axis is inactive)."""
        spacings = [self.spacing[a] for a in self.active_axes]
        return min(spacings) if spacings else float("inf")

    @property
    def h_max(self) -> float:
        """Largest spacing over active axes (0 when every axis is inactive)."""
        return max((self.spacing[a] for a in self.active_axes), default=0.0)

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinates x_axis = i*h, shaped to broadcast against grid.sizes."""
        shape = [1] * self.n
        shape[axis] = self.sizes[axis]
        return (np.arange(self.sizes[axis]) * self.spacing[axis]).reshape(shape)


# ==================== Array stencils ====================

def _check_grid_shape(values: np.ndarray, grid: GridSpec) -> None:
    if values.shape[: grid.n] != grid.sizes:
        raise DimensionMismatch(f"field shape {values.shape} does not start with grid sizes {grid.sizes}")


def partial_array(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Second-order periodic central difference along `axis`; zero on inactive axes."""
    _check_grid_shape(values, grid)
    if not grid.active[axis]:
        return np.zeros_like(values)
    h = grid.spacing[axis]
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)


def laplacian_array(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Sum of composed central differences D_a D_a over active axes."""
    out = np.zeros_like(values)
    for a in grid.active_axes:
        out += partial_array(partial_array(values, grid, a), grid, a)
    return out


def integrate(density: np.ndarray, grid: GridSpec) -> float:
    """Midpoint quadrature of a scalar density."""
    _check_grid_shape(np.asarray(density), grid)
    return float(np.sum(density) * grid.cell_volume)


# ==================== Fields ====================

class _Field(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def as_float_array(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    def _component_shape(self) -> Optional[Tuple[int, ...]]:
        return None

    @model_validator(mode="after")
    def check_values(self) -> "_Field":
        _check_grid_shape(self.values, self.grid)
        expected = self._component_shape()
        if expected is not None and self.values.shape[self.grid.n:] != expected:
            raise DimensionMismatch(
                f"{type(self).__name__} expects components {expected}, got {self.values.shape[self.grid.n:]}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{type(self).__name__} values must be finite")
        return self

    def with_values(self, values: np.ndarray):
        return self.model_copy(update={"values": np.asarray(values, dtype=float)})

    def max_norm(self) -> float:
        comp = self.values.reshape(self.grid.sizes + (-1,))
        return float(np.max(np.linalg.norm(comp, axis=-1))) if comp.size else 0.0


class ScalarField(_Field):
    def _component_shape(self):
        return ()


class VectorField(_Field):
    dim: int = Field(ge=1, le=8)

    def _component_shape(self):
        return (self.dim,)


class MatrixField(_Field):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)

    def _component_shape(self):
        return (self.rows, self.cols)


class FormField(_Field):
    dim: int = Field(ge=0, le=8)
    degree: int = Field(ge=0, le=8)

    def _component_shape(self):
        return (comb(self.dim, self.degree),)


def partial(f: _Field, axis: int) -> _Field:
    """
    Central-difference partial derivative of any field along `axis`.

    Args:
        f: Field on a periodic grid
        axis: Grid axis; inactive axes return the zero field

    Returns:
        Field of the same type and component shape
    """
    return f.with_values(partial_array(f.values, f.grid, axis))


def laplacian(f: _Field) -> _Field:
    """Componentwise Laplacian sum_i d_i d_i; the rough Laplacian is its negative."""
    return f.with_values(laplacian_array(f.values, f.grid))


def divergence(v: VectorField) -> ScalarField:
    """sum_i d_i v_i over the first grid.n components."""
    if v.dim != v.grid.n:
        raise DimensionMismatch(f"divergence needs a {v.grid.n}-vector field, got dim {v.dim}")
    out = np.zeros(v.grid.sizes)
    for a in v.grid.active_axes:
        out += partial_array(v.values[..., a], v.grid, a)
    return ScalarField(grid=v.grid, values=out)


# ==================== S^3 homogeneous model ====================

def hopf_structure_constants(orientation: int = 1) -> np.ndarray:
    """c[a, j, k] with nabla_{E_a} E_j = sum_k c[a, j, k] E_k on the unit S^3."""
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[i, j, k] = s
    return orientation * eps


class S3Homogeneous(BaseModel):
    """
    Constant-coefficient frame sigma_i = sum_j A_ij E_j in the Hopf basis of the unit S^3.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: np.ndarray = Field(description="3 x 3 frame coefficients, in SO(3)")
    orientation: int = Field(default=1, description="Sign of the Hopf structure constants")

    @field_validator("A", mode="before")
    @classmethod
    def as_matrix(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @field_validator("orientation")
    @classmethod
    def check_orientation(cls, v: int) -> int:
        if v not in (-1, 1):
            raise ValueError("orientation must be +1 or -1")
        return v

    @model_validator(mode="after")
    def check_rotation(self) -> "S3Homogeneous":
        if self.A.shape != (3, 3):
            raise DimensionMismatch(f"A must be 3 x 3, got {self.A.shape}")
        if not np.allclose(self.A @ self.A.T, np.eye(3), rtol=0.0, atol=1e-12) or np.linalg.det(self.A) <= 0:
            raise ValueError("A must lie in SO(3) to 1e-12")
        return self

    @property
    def connection(self) -> np.ndarray:
        return hopf_structure_constants(self.orientation)


def s3_hopf_torsion(model: S3Homogeneous) -> np.ndarray:
    """
    Torsion matrices W[a, p, q] = <sigma_p, nabla_{E_a} sigma_q>.

    Returns:
        Array of shape (3, 3, 3), skew in (p, q)
    """
    A = model.A
    return np.einsum("pk,qj,ajk->apq", A, A, model.connection)


def s3_hopf_tension(model: S3Homogeneous) -> np.ndarray:
    """
    Tension of the homogeneous frame, tr nabla^2 sigma_i + sum_j G_ij sigma_j.

    Every derivative reduces to structure-constant sums since A is constant.

    Returns:
        Skew 3 x 3 matrix R[p, q] = <sigma_p, tau(sigma_q)>
    """
    A = model.A
    gamma = model.connection
    second = np.einsum("ajk,akl->jl", gamma, gamma)
    gram = A @ np.einsum("ajk,alk->jl", gamma, gamma) @ A.T
    rows = A @ second + gram @ A
    return A @ rows.T


def s3_energy_density(model: S3Homogeneous) -> float:
    """Half the squared norm of the torsion; 3 for every homogeneous frame on the unit S^3."""
    return 0.5 * float(np.sum(s3_hopf_torsion(model) ** 2))
