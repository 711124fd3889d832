"""
G2 representation theory on R^7 and the torsion calculus of G2 fields.

This module provides:
- The standard 3-form phi0 and its dual psi0 = *phi0, with startup checks of
  every identity constant the flows rely on
- Irreducible splittings of 2-forms (7 + 14) and 3-forms (1 + 7 + 27)
- Recovery of the vector and of the so(7) element behind a Lambda^3_7 form
- The metric induced by a 3-form
- Full torsion and its divergence, the gradient of the discrete energy, the
  flow right-hand side built from it, the tension and the harmonic-map
  residual of a G2 field on a flat periodic grid

Conventions (0-based indices, standard orientation of R^7):
- phi0 = e012 + e034 + e056 + e135 - e146 - e236 - e245
- eta -> *(phi0 ∧ eta) acts by +2 on Lambda^2_7 and by -1 on Lambda^2_14
- beta = X ⌟ phi0 acts on phi0 by beta.phi0 = -3 X ⌟ psi0
- (X ⌟ psi0) ⌟ psi0 = -24 X and ((beta.phi0) ⌟ psi0) ⌟ phi0 = 72 beta
"""

from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from infrastructure.config import get_config
from infrastructure.errors import ConventionError, DimensionMismatch, MetricDrift, NonPositiveForm
from infrastructure.exterior import (
    AltForm,
    SkewMatrix,
    Vector,
    interior_basis_array,
    contract_array,
    contract_forms,
    contract_left_adjoint_array,
    contract_right_adjoint_array,
    form_inner,
    hodge,
    hodge_adjoint_array,
    hodge_array,
    interior,
    interior_array,
    so_action,
    tensor_inner,
    wedge,
    wedge_array,
)
from infrastructure.grid import GridSpec, VectorField, MatrixField, FormField, partial_array


DIM = 7

PHI0_TERMS = {
    (0, 1, 2): 1.0,
    (0, 3, 4): 1.0,
    (0, 5, 6): 1.0,
    (1, 3, 5): 1.0,
    (1, 4, 6): -1.0,
    (2, 3, 6): -1.0,
    (2, 4, 5): -1.0,
}


# ==================== Constants ====================

class G2Constants(BaseModel):
    """phi0, psi0 and their dense sign tables."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phi0: AltForm
    psi0: AltForm
    phi_tensor: np.ndarray = Field(description="phi_ijk as a dense 7x7x7 sign array")
    psi_tensor: np.ndarray = Field(description="psi_ijkl as a dense 7x7x7x7 sign array")
    sign: int = Field(default=1, description="+1 for the standard phi0, -1 for the flipped mutation")

    @model_validator(mode="after")
    def check_pair(self) -> "G2Constants":
        if (self.phi0.degree, self.phi0.dim, self.psi0.degree, self.psi0.dim) != (3, DIM, 4, DIM):
            raise DimensionMismatch("G2 constants need a 3-form and a 4-form on R^7")
        if not hodge(self.phi0).allclose(self.psi0):
            raise ConventionError("psi0 must equal *phi0")
        return self


def build_g2_constants(sign: int = 1) -> G2Constants:
    """
    Build the constants for sign * phi0 without asserting the identities.

    Args:
        sign: +1 for the standard structure; -1 is the mutation used to check
            that the identity suite notices a flipped convention

    Returns:
        G2Constants
    """
    phi = AltForm.from_terms(DIM, 3, PHI0_TERMS) * float(sign)
    psi = hodge(phi)
    return G2Constants(phi0=phi, psi0=psi, phi_tensor=phi.to_tensor(), psi_tensor=psi.to_tensor(), sign=sign)


def measure_identity_constants(constants: G2Constants) -> Dict[str, float]:
    """
    Measure the normalization constants of the identities at X = e_0.

    Returns:
        Dict with keys eq3 (72), psi_contraction (-24), phi_interior_norm (6),
        beta_action (-3), volume (7)
    """
    phi, psi = constants.phi0, constants.psi0
    x = Vector.unit(DIM, 0)
    beta = interior(x, phi)
    gamma = so_action(SkewMatrix.from_two_form(beta), phi)
    lhs = interior(Vector(dim=DIM, components=contract_forms(gamma, psi).coeffs), phi)
    x_psi = interior(x, psi)
    recovered = contract_forms(x_psi, psi).coeffs
    return {
        "eq3": form_inner(lhs, beta) / form_inner(beta, beta),
        "psi_contraction": float(recovered[0]),
        "phi_interior_norm": tensor_inner(beta, beta),
        "beta_action": form_inner(gamma, x_psi) / form_inner(x_psi, x_psi),
        "volume": float(wedge(phi, psi).coeffs[0]),
    }


EXPECTED_CONSTANTS = {
    "eq3": 72.0,
    "psi_contraction": -24.0,
    "phi_interior_norm": 6.0,
    "beta_action": -3.0,
    "volume": 7.0,
}


def assert_conventions(constants: G2Constants, tol: Optional[float] = None) -> None:
    """Raise ConventionError if any measured identity constant is off."""
    tol = get_config().identity_tol if tol is None else tol
    measured = measure_identity_constants(constants)
    for name, expected in EXPECTED_CONSTANTS.items():
        if abs(measured[name] - expected) > tol * max(1.0, abs(expected)):
            raise ConventionError(f"identity '{name}' measured {measured[name]!r}, expected {expected}")
    nonzero = constants.phi0.nonzero_terms()
    if len(nonzero) != 7 or any(abs(abs(v) - 1.0) > 0 for v in nonzero.values()):
        raise ConventionError("phi0 must have exactly 7 coefficients equal to +-1")
    if len(constants.psi0.nonzero_terms()) != 7:
        raise ConventionError("psi0 must have exactly 7 nonzero coefficients")


@lru_cache(maxsize=1)
def get_g2_constants() -> G2Constants:
    """Standard constants, checked once on first use."""
    constants = build_g2_constants(1)
    assert_conventions(constants)
    return constants


def _resolve(constants: Optional[G2Constants]) -> G2Constants:
    return get_g2_constants() if constants is None else constants


# ==================== Splittings ====================

class Lambda2Split(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    part7: AltForm
    part14: AltForm

    def total(self) -> AltForm:
        return self.part7 + self.part14


class Lambda3Split(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    part1: AltForm
    part7: AltForm
    part27: AltForm
    vector: Vector = Field(description="X with part7 = X ⌟ psi0")

    def total(self) -> AltForm:
        return self.part1 + self.part7 + self.part27


def _check_dim7(form: AltForm, degree: int) -> None:
    if form.dim != DIM or form.degree != degree:
        raise DimensionMismatch(f"expected a {degree}-form on R^7, got degree {form.degree} on R^{form.dim}")


def lambda2_operator(eta: AltForm, constants: Optional[G2Constants] = None) -> AltForm:
    """eta -> *(phi0 ∧ eta)."""
    return hodge(wedge(_resolve(constants).phi0, eta))


def project_lambda2(eta: AltForm, constants: Optional[G2Constants] = None) -> Lambda2Split:
    """
    Split a 2-form into its Lambda^2_7 and Lambda^2_14 parts.

    Args:
        eta: 2-form on R^7 (batched allowed)
        constants: Override of the G2 constants

    Returns:
        Lambda2Split with part7 = (eta + S eta)/3 and part14 = (2 eta - S eta)/3,
        S = *(phi0 ∧ .)
    """
    _check_dim7(eta, 2)
    s = lambda2_operator(eta, constants)
    return Lambda2Split(part7=(eta + s) / 3.0, part14=(eta * 2.0 - s) / 3.0)


def recover_vector_psi(gamma7: AltForm, constants: Optional[G2Constants] = None) -> Vector:
    """
    X with gamma7 = X ⌟ psi0, via X = -(1/24) gamma7 ⌟ psi0.

    Input outside Lambda^3_7 returns the vector of its Lambda^3_7 part.
    """
    _check_dim7(gamma7, 3)
    full = contract_forms(gamma7, _resolve(constants).psi0)
    return Vector(dim=DIM, components=-full.coeffs / 24.0)


def project_lambda3(gamma: AltForm, constants: Optional[G2Constants] = None) -> Lambda3Split:
    """
    Split a 3-form into Lambda^3_1, Lambda^3_7 and Lambda^3_27 parts.

    part27 is the remainder after removing the other two.
    """
    _check_dim7(gamma, 3)
    c = _resolve(constants)
    coeff = form_inner(gamma, c.phi0) / 7.0
    part1 = c.phi0 * coeff
    x = recover_vector_psi(gamma, c)
    part7 = interior(x, c.psi0)
    return Lambda3Split(part1=part1, part7=part7, part27=gamma - part1 - part7, vector=x)


def recover_beta_72(gamma7: AltForm, phi: Optional[AltForm] = None,
                    psi: Optional[AltForm] = None) -> SkewMatrix:
    """
    beta = (1/72) (gamma7 ⌟ psi) ⌟ phi, the Lambda^2_7 element with beta.phi = gamma7.

    Args:
        gamma7: 3-form in Lambda^3_7 of (phi, psi)
        phi: 3-form (defaults to phi0)
        psi: 4-form (defaults to psi0)

    Returns:
        SkewMatrix of the recovered 2-form
    """
    c = get_g2_constants() if phi is None or psi is None else None
    phi = c.phi0 if phi is None else phi
    psi = c.psi0 if psi is None else psi
    vec = contract_forms(gamma7, psi)
    beta = interior(Vector(dim=DIM, components=vec.coeffs), phi) / 72.0
    return SkewMatrix.from_two_form(beta)


def lambda2_operator_matrix(constants: Optional[G2Constants] = None) -> np.ndarray:
    """21 x 21 matrix of eta -> *(phi0 ∧ eta) on the increasing basis of 2-forms."""
    eye = AltForm(degree=2, dim=DIM, coeffs=np.eye(21))
    return lambda2_operator(eye, constants).coeffs.T


def lambda3_projector_matrices(constants: Optional[G2Constants] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """35 x 35 matrices of the three Lambda^3 projectors."""
    split = project_lambda3(AltForm(degree=3, dim=DIM, coeffs=np.eye(35)), constants)
    return split.part1.coeffs.T, split.part7.coeffs.T, split.part27.coeffs.T


# ==================== Metric ====================

def metric_from_phi_array(phi: np.ndarray) -> np.ndarray:
    """
    Batched metric of 3-form coefficients phi[..., 35].

    B(X, Y) vol = (1/6) (X ⌟ phi) ∧ (Y ⌟ phi) ∧ phi and g = det(B)^(-1/9) B.

    Raises:
        NonPositiveForm: if det(B) <= 0 anywhere
    """
    iota = interior_basis_array(phi, DIM, 3)
    w = wedge_array(iota, phi[..., None, :], DIM, 2, 3)
    top = wedge_array(iota[..., :, None, :], w[..., None, :, :], DIM, 2, 5)[..., 0]
    b = top / 6.0
    det = np.linalg.det(b)
    if np.any(~np.isfinite(det)) or np.any(det <= 0.0):
        raise NonPositiveForm("3-form is not positive: det(B) <= 0")
    return b * (det ** (-1.0 / 9.0))[..., None, None]


def metric_from_phi(phi: AltForm) -> np.ndarray:
    """Symmetric 7 x 7 metric induced by a positive 3-form."""
    _check_dim7(phi, 3)
    return metric_from_phi_array(phi.coeffs)


# ==================== G2 fields ====================

class G2Field(FormField):
    """Grid of 3-forms phi on a flat 7-torus."""

    dim: int = DIM
    degree: int = 3

    @field_validator("dim")
    @classmethod
    def check_dim(cls, v: int) -> int:
        if v != DIM:
            raise DimensionMismatch("G2 fields live on R^7")
        return v

    @model_validator(mode="after")
    def check_base(self) -> "G2Field":
        if self.grid.n != DIM:
            raise DimensionMismatch(f"G2 fields need a 7-dimensional grid, got n = {self.grid.n}")
        return self


class TorsionField(MatrixField):
    """T[..., a, j]: row a is T(e_a)."""

    rows: int = DIM
    cols: int = DIM


def metric_drift(phi: G2Field) -> float:
    """max over points of |g_phi - id|."""
    g = metric_from_phi_array(phi.values)
    return float(np.max(np.abs(g - np.eye(DIM))))


def _check_drift(phi: G2Field, drift_tol: Optional[float]) -> None:
    if drift_tol is None:
        return
    drift = metric_drift(phi)
    if drift >= drift_tol:
        raise MetricDrift(f"metric drift {drift:.3e} exceeds drift_tol {drift_tol:.3e}")


def torsion_array(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """T[..., a, :] = -(1/24) (d_a phi) ⌟ psi with psi = *phi pointwise."""
    psi = hodge_array(phi, DIM, 3)
    torsion = np.zeros(grid.sizes + (DIM, DIM))
    for a in grid.active_axes:
        torsion[..., a, :] = -contract_array(partial_array(phi, grid, a), psi, DIM, 3, 4) / 24.0
    return torsion


def divergence_of_torsion_array(torsion: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(div T)_j = sum_a d_a T_aj."""
    div = np.zeros(grid.sizes + (DIM,))
    for a in grid.active_axes:
        div += partial_array(torsion[..., a, :], grid, a)
    return div


def g2_pointwise_rhs_array(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(div T) ⌟ psi evaluated with central differences; agrees with g2_rhs_array to O(h^2)."""
    div = divergence_of_torsion_array(torsion_array(phi, grid), grid)
    return interior_array(div, hodge_array(phi, DIM, 3), DIM, 4)


def energy_gradient_array(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    Coefficient gradient G of the discrete energy sum |T|^2 / 3, dE = cell volume * sum G . dphi.

    Both slots of T_a = -(1/24) (d_a phi) ⌟ *phi are varied; the derivative
    slot is summed by parts, the Hodge slot goes through the transpose of *.
    """
    psi = hodge_array(phi, DIM, 3)
    divergence = np.zeros(phi.shape)
    hodge_part = np.zeros(psi.shape)
    for a in grid.active_axes:
        d_phi = partial_array(phi, grid, a)
        t_a = -contract_array(d_phi, psi, DIM, 3, 4) / 24.0
        divergence += partial_array(contract_left_adjoint_array(t_a, psi, DIM, 3, 4), grid, a)
        hodge_part += contract_right_adjoint_array(d_phi, t_a, DIM, 3, 4)
    return (divergence - hodge_adjoint_array(hodge_part, DIM, 3)) / 36.0


def flow_vector_array(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    X with g2_rhs_array = X ⌟ psi.

    The rhs is -6 times the Lambda^3_7 part of the energy gradient, the
    factor 6 undoing the 1/6 weight of the form metric; the projection
    is gamma -> -(1/24) (gamma ⌟ psi) ⌟ psi.
    """
    psi = hodge_array(phi, DIM, 3)
    return contract_array(energy_gradient_array(phi, grid), psi, DIM, 3, 4) / 4.0


def g2_rhs_array(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Discrete isometric flow X ⌟ psi, exactly minus the gradient of the discrete energy."""
    return interior_array(flow_vector_array(phi, grid), hodge_array(phi, DIM, 3), DIM, 4)


def full_torsion(phi: G2Field, drift_tol: Optional[float] = None) -> TorsionField:
    """
    Full torsion tensor of a G2 field, defined by d_X phi = T(X) ⌟ psi.

    Args:
        phi: G2 field on a flat 7-torus grid
        drift_tol: Metric drift bound; defaults to the configured drift_tol

    Returns:
        TorsionField with rows T(e_a); rows of inactive axes are zero

    Raises:
        MetricDrift: if max|g_phi - id| >= drift_tol
    """
    _check_drift(phi, get_config().drift_tol if drift_tol is None else drift_tol)
    return TorsionField(grid=phi.grid, values=torsion_array(phi.values, phi.grid))


def torsion_divergence(phi: G2Field, drift_tol: Optional[float] = None) -> VectorField:
    torsion = full_torsion(phi, drift_tol)
    return VectorField(grid=phi.grid, dim=DIM,
                       values=divergence_of_torsion_array(torsion.values, phi.grid))


def g2_flow_rhs(phi: G2Field, drift_tol: Optional[float] = None) -> FormField:
    """
    Right-hand side X ⌟ psi of the isometric G2 flow.

    X is the discrete counterpart of div T: the rhs is exactly minus the
    gradient of the discrete energy for the 1/6-weighted form metric and
    agrees with (div T) ⌟ psi to O(h^2).

    Raises:
        MetricDrift: as full_torsion
    """
    _check_drift(phi, get_config().drift_tol if drift_tol is None else drift_tol)
    return FormField(grid=phi.grid, dim=DIM, degree=3, values=g2_rhs_array(phi.values, phi.grid))


def g2_tension_m(phi: G2Field, drift_tol: Optional[float] = None) -> MatrixField:
    """
    Lambda^2_7 representation -1/3 X ⌟ phi of the tension, as skew matrices.

    Acting on phi it gives g2_flow_rhs, and dE/ds along exp(s Omega) . phi
    equals minus the grid sum of <tension, Omega> times the cell volume.
    """
    _check_drift(phi, get_config().drift_tol if drift_tol is None else drift_tol)
    x = flow_vector_array(phi.values, phi.grid)
    beta = -interior_array(x, phi.values, DIM, 3) / 3.0
    entries = SkewMatrix.from_two_form(AltForm(degree=2, dim=DIM, coeffs=beta)).entries
    return MatrixField(grid=phi.grid, rows=DIM, cols=DIM, values=entries)


def torsion_to_lambda2(torsion: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Vertical torsion I(d^V sigma(e_a)) = -1/3 T(e_a) ⌟ phi as skew matrices [..., a, 7, 7]."""
    beta = -interior_array(torsion, phi[..., None, :], DIM, 3) / 3.0
    return SkewMatrix.from_two_form(AltForm(degree=2, dim=DIM, coeffs=beta)).entries


def g2_energy_density(phi: G2Field, via: str = "torsion") -> np.ndarray:
    """
    Energy density of a G2 field.

    Args:
        phi: G2 field
        via: "torsion" for |T|^2 / 3, "lambda2" for half the Frobenius norm of
            the Lambda^2_7 vertical torsion; both agree since |d^V sigma|^2 = 2/3 |T|^2

    Returns:
        Density array of shape grid.sizes
    """
    torsion = torsion_array(phi.values, phi.grid)
    if via == "torsion":
        return np.sum(torsion ** 2, axis=(-2, -1)) / 3.0
    if via == "lambda2":
        vertical = torsion_to_lambda2(torsion, phi.values)
        return 0.5 * np.sum(vertical ** 2, axis=(-3, -2, -1))
    raise ValueError(f"unknown energy path '{via}'")


def harmonic_map_residual(phi: G2Field, drift_tol: Optional[float] = None) -> VectorField:
    """
    R_p = sum_ij T_ij (d_i T_pj - d_p T_ij); vanishes for sections that are harmonic maps.
    """
    torsion = full_torsion(phi, drift_tol).values
    grid = phi.grid
    dt = np.stack([partial_array(torsion, grid, b) for b in range(DIM)], axis=grid.n)
    first = np.einsum("...ij,...ipj->...p", torsion, dt)
    second = np.einsum("...ij,...pij->...p", torsion, dt)
    return VectorField(grid=grid, dim=DIM, values=first - second)


def constant_phi_field(grid: GridSpec, constants: Optional[G2Constants] = None) -> G2Field:
    c = _resolve(constants)
    return G2Field(grid=grid, values=np.broadcast_to(c.phi0.coeffs, grid.sizes + (35,)).copy())
