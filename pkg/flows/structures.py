"""
The four harmonic section flows as per-kind structure models.

This module provides:
- A StructureModel per kind: packing into a flat value array, right-hand
  side, energy and kinetic densities, torsion and tension representations,
  retraction, constraint drift and the orbit action used by generators and
  gradient checks
- The public right-hand sides parallelism_rhs, acs_rhs and acts_rhs
- Explicit-formula variants of the frame and Reeb-field equations
- The Lambda bound entering the CFL condition, measured for G2 by power iteration

Discrete conventions on a periodic grid with central differences D_a and
the composed Laplacian L = sum_a D_a D_a:
- frames S (columns sigma_i): eps = 1/2 sum_a |D_a S|^2, rhs = S skew(S^T L S)
- almost complex J: eps = 1/8 sum_a |D_a J|^2, rhs = 1/2 (L J + J (L J) J)
- almost contact (xi, theta): the almost complex formulas applied to the lift
  Jhat = [[theta, xi], [-xi^T, 0]]
- G2 phi: eps = 1/3 |T|^2, rhs = X ⌟ psi with X the discrete div T recovered
  from the exact energy gradient

Each rhs is exactly minus the gradient of the discrete energy for the vertical
metric (Frobenius, 1/4 Frobenius, 1/4 Frobenius, 1/6 form norm), because
central differences sum by parts exactly.
"""

from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from infrastructure.errors import ConstraintViolation
from infrastructure.exterior import act_array, contract_array, hodge_array, so_action_array
from infrastructure.g2 import DIM as G2_DIM
from infrastructure.g2 import G2Field, g2_rhs_array, get_g2_constants, metric_from_phi_array, torsion_array
from infrastructure.grid import (
    S3_VOLUME,
    GridSpec,
    MatrixField,
    S3Homogeneous,
    VectorField,
    laplacian_array,
    partial_array,
    s3_hopf_torsion,
)
from infrastructure.validators import StructureValidator
from flows.retraction import (
    complex_drift,
    frame_drift,
    lift_contact,
    polar_rotation,
    retract_complex,
    retract_contact,
    retract_frames,
    skew_part,
    unlift_contact,
)
from flows.state import ACSField, ACtSField, FlowKind, FrameField, RetractionMethod, StructureField


INPUT_TOL = 1e-8


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _complex_rhs(j: np.ndarray, grid: GridSpec) -> np.ndarray:
    lap = laplacian_array(j, grid)
    return 0.5 * (lap + j @ lap @ j)


def _sum_sq_partials(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.zeros(grid.sizes)
    comp_axes = tuple(range(grid.n, values.ndim))
    for a in grid.active_axes:
        out += np.sum(partial_array(values, grid, a) ** 2, axis=comp_axes)
    return out


class StructureModel(ABC):
    """Per-kind numerics of a harmonic section flow on a flat torus."""

    kind: FlowKind
    metric_weight: float = 1.0
    default_retraction: RetractionMethod = RetractionMethod.POLAR

    # ---------- packing ----------

    @abstractmethod
    def pack(self, structure: StructureField) -> np.ndarray:
        """Flat value array the integrators work on."""

    @abstractmethod
    def unpack(self, values: np.ndarray, grid: GridSpec) -> StructureField:
        """Inverse of pack."""

    # ---------- flow ----------

    @abstractmethod
    def rhs(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        """Vertical tension in the packed representation."""

    @abstractmethod
    def energy_density(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        """eps = 1/2 |d^V sigma|^2 per grid point."""

    @abstractmethod
    def torsion_rep(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        """Torsion representation [..., axis, ...] whose half squared norm is eps."""

    @abstractmethod
    def tension_rep(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Tension representation whose squared norm is |tau^V|^2."""

    def metric_inner(self, a: np.ndarray, b: np.ndarray, grid: GridSpec) -> np.ndarray:
        axes = tuple(range(grid.n, a.ndim))
        return self.metric_weight * np.sum(a * b, axis=axes)

    def kinetic_density(self, values: np.ndarray, rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
        return 0.5 * self.metric_inner(rhs, rhs, grid)

    def cell_volume(self, grid: GridSpec) -> float:
        return grid.cell_volume

    def diffusion_constant(self) -> float:
        return 1.0

    # ---------- constraints ----------

    @abstractmethod
    def retract(self, values: np.ndarray) -> np.ndarray:
        """Project drifted values back onto the constraint set."""

    @abstractmethod
    def constraint_drift(self, values: np.ndarray) -> float:
        """Sup-norm distance from the constraint set."""

    # ---------- orbit action ----------

    @property
    @abstractmethod
    def group_dim(self) -> int:
        """n of the rotation group SO(n) acting on the values."""

    @abstractmethod
    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        """Pointwise group action by rotations [..., n, n]."""

    @abstractmethod
    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        """Derivative of act(values, exp(s Omega)) at s = 0."""


# ==================== Parallelisms ====================

class FrameModel(StructureModel):
    kind = FlowKind.PARALLELISM

    def pack(self, structure: FrameField) -> np.ndarray:
        return structure.values.copy()

    def unpack(self, values: np.ndarray, grid: GridSpec) -> FrameField:
        return FrameField(grid=grid, values=values)

    def rhs(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        lap = laplacian_array(values, grid)
        return values @ skew_part(np.swapaxes(values, -1, -2) @ lap)

    def energy_density(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return 0.5 * _sum_sq_partials(values, grid)

    def torsion_rep(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        st = np.swapaxes(values, -1, -2)
        return np.stack([st @ partial_array(values, grid, a) for a in range(grid.n)], axis=grid.n)

    def tension_rep(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        return np.swapaxes(values, -1, -2) @ rhs

    def retract(self, values: np.ndarray) -> np.ndarray:
        return retract_frames(values)

    def constraint_drift(self, values: np.ndarray) -> float:
        return frame_drift(values)

    @property
    def group_dim(self) -> int:
        return 3

    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        return rotations @ values

    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        return generators @ values


class S3HopfModel(StructureModel):
    """Homogeneous frames on the unit S^3; the packed value is the 3 x 3 matrix A."""

    kind = FlowKind.PARALLELISM

    def __init__(self, orientation: int = 1):
        self.orientation = orientation

    def pack(self, structure: S3Homogeneous) -> np.ndarray:
        self.orientation = structure.orientation
        return structure.A.copy()

    def unpack(self, values: np.ndarray, grid: GridSpec) -> S3Homogeneous:
        return S3Homogeneous(A=values, orientation=self.orientation)

    def _model(self, values: np.ndarray) -> S3Homogeneous:
        return S3Homogeneous.model_construct(A=values, orientation=self.orientation)

    def rhs(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        model = self._model(values)
        gamma = model.connection
        second = np.einsum("ajk,akl->jl", gamma, gamma)
        gram = values @ np.einsum("ajk,alk->jl", gamma, gamma) @ values.T
        return values @ second + gram @ values

    def energy_density(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.full(grid.sizes, 0.5 * float(np.sum(s3_hopf_torsion(self._model(values)) ** 2)))

    def torsion_rep(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.broadcast_to(s3_hopf_torsion(self._model(values)), grid.sizes + (3, 3, 3)).copy()

    def tension_rep(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        return values @ rhs.T

    def metric_inner(self, a: np.ndarray, b: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.full(grid.sizes, float(np.sum(a * b)))

    def cell_volume(self, grid: GridSpec) -> float:
        return S3_VOLUME / grid.n_points

    def retract(self, values: np.ndarray) -> np.ndarray:
        return polar_rotation(values)

    def constraint_drift(self, values: np.ndarray) -> float:
        return frame_drift(values)

    @property
    def group_dim(self) -> int:
        return 3

    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        return values @ rotations.T

    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        return values @ generators.T


# ==================== Almost complex structures ====================

class ComplexModel(StructureModel):
    kind = FlowKind.ACS
    metric_weight = 0.25

    def __init__(self, dim: int = 4):
        self.dim = dim

    def pack(self, structure: ACSField) -> np.ndarray:
        return structure.values.copy()

    def unpack(self, values: np.ndarray, grid: GridSpec) -> ACSField:
        n = values.shape[-1]
        return ACSField(grid=grid, rows=n, cols=n, values=values)

    def rhs(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return _complex_rhs(values, grid)

    def energy_density(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return 0.125 * _sum_sq_partials(values, grid)

    def torsion_rep(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.stack([0.5 * values @ partial_array(values, grid, a) for a in range(grid.n)], axis=grid.n)

    def tension_rep(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        return 0.5 * values @ rhs

    def retract(self, values: np.ndarray) -> np.ndarray:
        return retract_complex(values)

    def constraint_drift(self, values: np.ndarray) -> float:
        return complex_drift(values)

    @property
    def group_dim(self) -> int:
        return self.dim

    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        return rotations @ values @ np.swapaxes(rotations, -1, -2)

    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        return _commutator(generators, values)


# ==================== Almost contact structures ====================

class ContactModel(ComplexModel):
    """Almost contact structures evolved through the lift Jhat on R^{n+1}."""

    kind = FlowKind.ACTS

    def pack(self, structure: ACtSField) -> np.ndarray:
        return lift_contact(structure.xi, structure.theta)

    def unpack(self, values: np.ndarray, grid: GridSpec) -> ACtSField:
        xi, theta = unlift_contact(values)
        return ACtSField(grid=grid, xi=xi, theta=theta)

    def retract(self, values: np.ndarray) -> np.ndarray:
        return lift_contact(*retract_contact(*unlift_contact(values)))

    def _embed(self, rotations: np.ndarray) -> np.ndarray:
        n = rotations.shape[-1]
        out = np.zeros(rotations.shape[:-2] + (n + 1, n + 1))
        out[..., :n, :n] = rotations
        return out

    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        full = self._embed(rotations)
        full[..., -1, -1] = 1.0
        return full @ values @ np.swapaxes(full, -1, -2)

    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        return _commutator(self._embed(generators), values)


# ==================== G2 structures ====================

class G2Model(StructureModel):
    kind = FlowKind.G2
    metric_weight = 1.0 / 6.0
    default_retraction = RetractionMethod.NONE

    def pack(self, structure: G2Field) -> np.ndarray:
        return structure.values.copy()

    def unpack(self, values: np.ndarray, grid: GridSpec) -> G2Field:
        return G2Field(grid=grid, values=values)

    def rhs(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return g2_rhs_array(values, grid)

    def energy_density(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.sum(torsion_array(values, grid) ** 2, axis=(-2, -1)) / 3.0

    def torsion_rep(self, values: np.ndarray, grid: GridSpec) -> np.ndarray:
        return np.sqrt(2.0 / 3.0) * torsion_array(values, grid)

    def tension_rep(self, values: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        div = -contract_array(rhs, hodge_array(values, G2_DIM, 3), G2_DIM, 3, 4) / 24.0
        return np.sqrt(2.0 / 3.0) * div

    def retract(self, values: np.ndarray) -> np.ndarray:
        return values

    def constraint_drift(self, values: np.ndarray) -> float:
        return float(np.max(np.abs(metric_from_phi_array(values) - np.eye(G2_DIM))))

    def diffusion_constant(self) -> float:
        return g2_diffusion_constant()

    @property
    def group_dim(self) -> int:
        return G2_DIM

    def act(self, values: np.ndarray, rotations: np.ndarray) -> np.ndarray:
        return act_array(rotations, values, G2_DIM, 3)

    def velocity(self, values: np.ndarray, generators: np.ndarray) -> np.ndarray:
        return so_action_array(generators, values, G2_DIM, 3)


def model_for(kind: FlowKind, structure: Optional[StructureField] = None) -> StructureModel:
    """
    Structure model for a flow kind.

    Args:
        kind: Flow kind
        structure: Structure instance; selects the S^3 model for homogeneous frames
            and the matrix size of almost complex structures

    Returns:
        StructureModel
    """
    kind = FlowKind(kind)
    if kind == FlowKind.PARALLELISM:
        if isinstance(structure, S3Homogeneous):
            return S3HopfModel(structure.orientation)
        return FrameModel()
    if kind == FlowKind.ACS:
        return ComplexModel() if structure is None else ComplexModel(structure.rows)
    if kind == FlowKind.ACTS:
        return ContactModel() if structure is None else ContactModel(structure.dim)
    return G2Model()


# ==================== Public right-hand sides ====================

_validator = StructureValidator(INPUT_TOL)


def parallelism_rhs(frame: FrameField) -> MatrixField:
    """
    Tension of a frame field on T^3, S skew(S^T L S).

    Equal to L sigma_i + sum_j G_ij sigma_j with G_ij = <D sigma_i, D sigma_j>
    up to O(h^2); the projected form is tangent to SO(3) exactly.

    Raises:
        ConstraintViolation: if the frames are not orthonormal
    """
    ok, message = _validator.validate_frames(frame.values)
    if not ok:
        raise ConstraintViolation(message)
    return MatrixField(grid=frame.grid, rows=3, cols=3, values=FrameModel().rhs(frame.values, frame.grid))


def parallelism_rhs_explicit(frame: FrameField) -> np.ndarray:
    """L sigma_i + |D sigma_i|^2 sigma_i + sum_{j != i} <D sigma_i, D sigma_j> sigma_j."""
    s, grid = frame.values, frame.grid
    gram = np.zeros(s.shape)
    for a in grid.active_axes:
        d = partial_array(s, grid, a)
        gram += np.swapaxes(d, -1, -2) @ d
    return laplacian_array(s, grid) + s @ gram


def acs_rhs(j: ACSField) -> MatrixField:
    """
    Tension 1/2 (L J + J (L J) J) of an almost complex structure field.

    Raises:
        ConstraintViolation: if J is not skew with J^2 = -I
    """
    ok, message = _validator.validate_complex(j.values)
    if not ok:
        raise ConstraintViolation(message)
    return j.with_values(_complex_rhs(j.values, j.grid))


def acs_tension_m(j: ACSField) -> np.ndarray:
    """Representation -1/4 [L J, J] of the tension; equals 1/2 J acs_rhs(J)."""
    return -0.25 * _commutator(laplacian_array(j.values, j.grid), j.values)


def acts_rhs(field: ACtSField) -> Tuple[VectorField, MatrixField]:
    """
    Tension of an almost contact structure as (xi-rhs, theta-rhs).

    Obtained from the almost complex formula on the lift Jhat; the xi part is
    orthogonal to xi and the theta part is tangent to the constraint set.

    Raises:
        ConstraintViolation: if (xi, theta) violate the constraint
    """
    ok, message = _validator.validate_contact(field.xi, field.theta)
    if not ok:
        raise ConstraintViolation(message)
    n = field.dim
    full = _complex_rhs(lift_contact(field.xi, field.theta), field.grid)
    return (VectorField(grid=field.grid, dim=n, values=full[..., :n, n]),
            MatrixField(grid=field.grid, rows=n, cols=n, values=full[..., :n, :n]))


def horizontal_projector(xi: np.ndarray) -> np.ndarray:
    return np.eye(xi.shape[-1]) - xi[..., :, None] * xi[..., None, :]


def acts_torsion(field: ACtSField) -> Dict[str, np.ndarray]:
    """
    Torsion pieces of an almost contact structure.

    Returns:
        Dict with "J" = 1/2 J nablabar_a J, nablabar = P D P on xi^perp, and
        "xi" = D_a xi, both stacked over axes a after the grid axes
    """
    grid, xi, theta = field.grid, field.xi, field.theta
    proj = horizontal_projector(xi)
    j_parts, xi_parts = [], []
    for a in range(grid.n):
        d_theta = proj @ partial_array(theta, grid, a) @ proj
        j_parts.append(0.5 * theta @ d_theta)
        xi_parts.append(partial_array(xi, grid, a))
    return {"J": np.stack(j_parts, axis=grid.n), "xi": np.stack(xi_parts, axis=grid.n)}


def acts_energy_density_split(field: ACtSField) -> np.ndarray:
    """1/2 (1/4 |nablabar J|^2 + |nabla xi|^2); matches the lifted density to O(h^2)."""
    parts = acts_torsion(field)
    grid = field.grid
    j_sq = np.sum(parts["J"] ** 2, axis=tuple(range(grid.n, parts["J"].ndim)))
    xi_sq = np.sum(parts["xi"] ** 2, axis=tuple(range(grid.n, parts["xi"].ndim)))
    # |1/2 J nablabar J|^2 = 1/4 |nablabar J|^2
    return 0.5 * (j_sq + xi_sq)


def acts_xi_rhs_explicit(field: ACtSField) -> np.ndarray:
    """L xi + |D xi|^2 xi - theta sum_a (nablabar_a J) D_a xi."""
    grid, xi, theta = field.grid, field.xi, field.theta
    proj = horizontal_projector(xi)
    out = laplacian_array(xi, grid)
    norm_sq = np.zeros(grid.sizes)
    coupling = np.zeros_like(xi)
    for a in grid.active_axes:
        d_xi = partial_array(xi, grid, a)
        norm_sq += np.sum(d_xi ** 2, axis=-1)
        d_theta = proj @ partial_array(theta, grid, a) @ proj
        coupling += np.einsum("...ij,...j->...i", d_theta, d_xi)
    return out + norm_sq[..., None] * xi - np.einsum("...ij,...j->...i", theta, coupling)


# ==================== Stability bound ====================

@lru_cache(maxsize=None)
def g2_diffusion_constant(points: int = 8, iterations: int = 60, seed: int = 7) -> float:
    """
    Lambda of the G2 flow: largest |eigenvalue| of the linearized rhs at phi0 times h^2.

    Estimated once by power iteration on an eight-point line grid with
    central-difference Jacobian-vector products, then cached.
    """
    grid = GridSpec.torus((points,) + (1,) * (G2_DIM - 1))
    phi0 = np.broadcast_to(get_g2_constants().phi0.coeffs, grid.sizes + (35,)).copy()
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(phi0.shape)
    eps = 1e-6
    lam = 0.0
    for _ in range(iterations):
        v /= np.linalg.norm(v)
        w = (g2_rhs_array(phi0 + eps * v, grid) - g2_rhs_array(phi0 - eps * v, grid)) / (2.0 * eps)
        lam = float(np.vdot(v, w))
        v = w
    h = grid.spacing[0]
    return abs(lam) * h * h / grid.n_active


def cfl_timestep(model: StructureModel, grid: GridSpec, cfl: float) -> float:
    """cfl * h_min^2 / (2 n_active Lambda); infinite when no axis is active."""
    if grid.n_active == 0:
        return float("inf")
    return cfl * grid.h_min ** 2 / (2.0 * grid.n_active * model.diffusion_constant())


# ==================== Gradient consistency ====================

def random_generators(rng: np.random.Generator, batch: Tuple[int, ...], n: int) -> np.ndarray:
    raw = rng.standard_normal(batch + (n, n))
    return skew_part(raw)


def energy_gradient_check(model: StructureModel, values: np.ndarray, grid: GridSpec,
                          generators: np.ndarray, delta: float = 1e-5) -> Tuple[float, float]:
    """
    Compare the central-difference derivative of E along an orbit curve with the rhs.

    Args:
        model: Structure model
        values: Packed structure values
        grid: Grid
        generators: Skew matrices Omega, one per grid point (a single
            matrix for the S^3 model)
        delta: Finite-difference step

    Returns:
        (dE/ds by central differences, -sum g(rhs, velocity) * cell volume)
    """
    def energy_at(s: float) -> float:
        rotations = expm(s * generators)
        moved = model.act(values, rotations)
        return float(np.sum(model.energy_density(moved, grid)) * model.cell_volume(grid))

    measured = (energy_at(delta) - energy_at(-delta)) / (2.0 * delta)
    velocity = model.velocity(values, generators)
    rhs = model.rhs(values, grid)
    predicted = -float(np.sum(model.metric_inner(rhs, velocity, grid)) * model.cell_volume(grid))
    return measured, predicted
