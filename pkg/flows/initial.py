"""
Initial conditions for the harmonic section flows.

Generators:
- constant: the model structure (identity frame, standard J0, (e_n, J0 on e_n^perp), phi0)
- mode: single Fourier mode orbit perturbation exp(s(x) beta) . model, s = a sin(k x_axis)
- noise: orbit perturbation by a seeded band-limited random generator field
- hopf: the left-invariant Hopf frame on the unit S^3
- constant_torsion: phi(x) = exp(c x_axis M) . phi0, M the Lambda^2_7 element of e_direction;
  its torsion is the constant row -3c e_direction, so div T = 0

Perturbations act through the orbit of SO(n), so every generated field lies
exactly on its constraint set up to rounding.
"""

from math import pi
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from infrastructure.exterior import SkewMatrix, Vector, interior
from infrastructure.g2 import DIM as G2_DIM
from infrastructure.g2 import get_g2_constants
from infrastructure.grid import GridSpec, S3Homogeneous
from infrastructure.run_config import RunConfig
from flows.retraction import lift_contact
from flows.state import FlowKind, FlowState
from flows.structures import StructureModel, model_for


def standard_complex(n: int) -> np.ndarray:
    """J0 = block diag of [[0, -1], [1, 0]] on R^n, n even."""
    if n % 2:
        raise ValueError(f"J0 needs an even dimension, got {n}")
    j = np.zeros((n, n))
    for i in range(0, n, 2):
        j[i + 1, i] = 1.0
        j[i, i + 1] = -1.0
    return j


def standard_contact(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(xi0, theta0) = (e_{n-1}, J0 on the first n - 1 coordinates)."""
    xi = np.zeros(n)
    xi[-1] = 1.0
    theta = np.zeros((n, n))
    theta[: n - 1, : n - 1] = standard_complex(n - 1)
    return xi, theta


def model_values(kind: FlowKind, grid: GridSpec) -> np.ndarray:
    """Packed values of the constant model structure on a grid."""
    kind = FlowKind(kind)
    n = grid.n
    if kind == FlowKind.PARALLELISM:
        point = np.eye(3)
    elif kind == FlowKind.ACS:
        point = standard_complex(n)
    elif kind == FlowKind.ACTS:
        point = lift_contact(*standard_contact(n))
    else:
        point = get_g2_constants().phi0.coeffs
    return np.broadcast_to(point, grid.sizes + point.shape).copy()


def _state(kind: FlowKind, model: StructureModel, values: np.ndarray, grid: GridSpec) -> FlowState:
    return FlowState(kind=kind, structure=model.unpack(values, grid))


def plane_generator(dim: int, plane: Optional[Sequence[int]] = None) -> np.ndarray:
    """E_qp - E_pq; rotates e_p toward e_q."""
    p, q = plane if plane is not None else (0, 2 if dim > 2 else 1)
    m = np.zeros((dim, dim))
    m[q, p] = 1.0
    m[p, q] = -1.0
    return m


def g2_direction_generator(direction: int) -> np.ndarray:
    """Skew matrix of e_direction ⌟ phi0, an element of Lambda^2_7."""
    beta = interior(Vector.unit(G2_DIM, direction), get_g2_constants().phi0)
    return SkewMatrix.from_two_form(beta).entries


def _orbit_generator(kind: FlowKind, model: StructureModel, plane: Optional[Sequence[int]],
                     direction: int) -> np.ndarray:
    if kind == FlowKind.G2:
        return g2_direction_generator(direction)
    return plane_generator(model.group_dim, plane)


def constant_state(kind: FlowKind, grid: GridSpec) -> FlowState:
    kind = FlowKind(kind)
    model = model_for(kind)
    if kind in (FlowKind.ACS, FlowKind.ACTS):
        model = type(model)(grid.n)
    return _state(kind, model, model_values(kind, grid), grid)


def mode_state(kind: FlowKind, grid: GridSpec, amplitude: float = 0.05, axis: int = 0, wavenumber: int = 1,
               plane: Optional[Sequence[int]] = None, direction: int = 0) -> FlowState:
    """
    Single-mode orbit perturbation exp(s(x) beta) . model with s = a sin(2 pi k x_axis / L).

    Args:
        kind: Flow kind
        grid: Torus grid
        amplitude: a
        axis: Grid axis carrying the mode
        wavenumber: k
        plane: Rotation plane of beta (frames, J, contact)
        direction: Vector whose Lambda^2_7 element is beta (G2)
    """
    base = constant_state(kind, grid)
    model = model_for(base.kind, base.structure)
    beta = _orbit_generator(base.kind, model, plane, direction)
    length = grid.axis_lengths[axis]
    s = amplitude * np.sin(2.0 * pi * wavenumber * grid.coordinate(axis) / length)
    s = np.broadcast_to(s, grid.sizes)
    rotations = expm(s[..., None, None] * beta)
    return _state(base.kind, model, model.act(model.pack(base.structure), rotations), grid)


def band_limited_noise(rng: np.random.Generator, grid: GridSpec, count: int, cutoff: int) -> np.ndarray:
    """
    `count` smooth random fields with Fourier support |k_i| <= cutoff, each scaled to max |f| = 1.

    Returns:
        Array of shape grid.sizes + (count,)
    """
    white = rng.standard_normal(grid.sizes + (count,))
    axes = tuple(range(grid.n))
    spectrum = np.fft.fftn(white, axes=axes)
    mask = np.ones(grid.sizes, dtype=bool)
    for axis, size in enumerate(grid.sizes):
        freq = np.abs(np.fft.fftfreq(size, d=1.0 / size))
        shape = [1] * grid.n
        shape[axis] = size
        mask = mask & (freq <= cutoff).reshape(shape)
    smooth = np.real(np.fft.ifftn(spectrum * mask[..., None], axes=axes))
    peak = np.max(np.abs(smooth), axis=axes, keepdims=True)
    return smooth / np.where(peak > 0.0, peak, 1.0)


def noise_state(kind: FlowKind, grid: GridSpec, amplitude: float = 0.05, cutoff: int = 2,
                seed: int = 1) -> FlowState:
    """
    Orbit perturbation exp(Omega(x)) . model by a band-limited random skew field Omega.

    G2 fields are moved along Lambda^2_7 only, since Lambda^2_14 fixes phi0.
    The RNG is Philox seeded with `seed`.
    """
    base = constant_state(kind, grid)
    model = model_for(base.kind, base.structure)
    rng = np.random.Generator(np.random.Philox(seed))
    if base.kind == FlowKind.G2:
        basis = np.stack([g2_direction_generator(i) for i in range(G2_DIM)])
    else:
        dim = model.group_dim
        basis = np.stack([plane_generator(dim, (p, q)) for p in range(dim) for q in range(p + 1, dim)])
    coeffs = amplitude * band_limited_noise(rng, grid, basis.shape[0], cutoff)
    omega = np.einsum("...c,cij->...ij", coeffs, basis)
    return _state(base.kind, model, model.act(model.pack(base.structure), expm(omega)), grid)


def hopf_state(orientation: int = 1, rotation: Optional[np.ndarray] = None) -> FlowState:
    """Homogeneous frame A = rotation (identity: the Hopf frame) on the unit S^3."""
    a = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    return FlowState(kind=FlowKind.PARALLELISM, structure=S3Homogeneous(A=a, orientation=orientation))


def constant_torsion_state(grid: GridSpec, axis: int = 0, direction: int = 0, wavenumber: int = 1) -> FlowState:
    """
    phi(x) = exp(c x_axis M) . phi0 with c = 2 pi k / L and M the Lambda^2_7 element of e_direction.

    exp(tM) is 2 pi periodic, so the field is periodic for integer k. The
    torsion is T(e_axis) = -3c e_direction and zero on the other axes.
    """
    model = model_for(FlowKind.G2)
    m = g2_direction_generator(direction)
    c = 2.0 * pi * wavenumber / grid.axis_lengths[axis]
    x = np.broadcast_to(grid.coordinate(axis), grid.sizes)
    rotations = expm((c * x)[..., None, None] * m)
    return _state(FlowKind.G2, model, model.act(model_values(FlowKind.G2, grid), rotations), grid)


def build_initial_state(run_config: RunConfig) -> FlowState:
    """
    Initial flow state described by a validated run configuration.

    Args:
        run_config: Validated RunConfig

    Returns:
        FlowState at t = 0
    """
    kind = FlowKind(run_config.kind)
    init = run_config.initial
    if run_config.geometry == "s3":
        if init.generator == "mode":
            return hopf_state(rotation=expm(init.amplitude * plane_generator(3, init.plane)))
        return hopf_state()

    grid = GridSpec.torus(run_config.grid.sizes, run_config.grid.lengths)
    if init.generator == "constant":
        return constant_state(kind, grid)
    if init.generator == "mode":
        return mode_state(kind, grid, init.amplitude, init.axis, init.wavenumber, init.plane, init.direction)
    if init.generator == "noise":
        return noise_state(kind, grid, init.amplitude, init.cutoff, init.seed)
    return constant_torsion_state(grid, init.axis, init.direction, init.wavenumber)
