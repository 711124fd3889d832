"""
Diagnostics of harmonic section flows.

This module provides:
- energy: Dirichlet and kinetic energies with their densities
- record_for: one DiagnosticsRecord of a flow state
- check_energy_identity: dE/dt = -2K along a sampled series, to C_id (h^2 + dt)
- check_blowup_bound: fitted C of eps(t) <= eps0 / (1 - C eps0 t) and the doubling time
- fit_heat_subsolution: constants of the heat inequalities for eps and kappa
- check_energy_monotonicity: E non-increasing, with the measured Euler constant
- heat_kernel, entropy_functional, entropy: the backward heat kernel weighted energy

Every report is a deterministic function of its input series.
"""

from math import ceil, pi, sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from infrastructure.config import get_config
from infrastructure.errors import DimensionMismatch, TooShortSeries
from infrastructure.g2 import harmonic_map_residual
from infrastructure.grid import GridSpec, ScalarField, laplacian_array, partial_array
from infrastructure.validators import SeriesValidator
from flows.state import DiagnosticsRecord, FlowKind, FlowState
from flows.structures import model_for


# ==================== Reports ====================

class _Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    def as_line(self) -> Dict[str, object]:
        """Object appended to the JSON-lines stream."""
        return {"report": type(self).__name__, **self.model_dump()}


class EnergyIdentityReport(_Report):
    samples: int = Field(description="Interior samples compared")
    spacing: float = Field(description="Sample spacing")
    h: float = Field(description="Grid spacing of the run")
    dt: float = Field(description="Timestep of the run")
    max_rel_error: float
    worst_t: Optional[float] = None
    tolerance: float = Field(description="C_id (h^2 + dt) unless fixed by the caller")
    passed: bool


class BoundCheckReport(_Report):
    C: float = Field(ge=0.0, description="Smallest C with eps <= eps0 / (1 - C eps0 t) on the series")
    delta_hat: float = Field(description="First time eps reaches 2 eps0, else the horizon")
    doubled: bool = Field(description="Whether eps reached 2 eps0 within the series")
    eps0_bar: float
    horizon: float
    product: float = Field(description="C eps0 delta_hat")
    margin: float = Field(description="1/2 + slack - C eps0 delta_hat")
    flags: Dict[str, bool]
    envelope_growing: bool = Field(description="eps_max ends at its running maximum and grew over the last quarter")
    passed: bool


class HeatFitReport(_Report):
    C1: float = Field(ge=0.0, description="H(eps) <= C1 eps (eps + 1) - |grad T|^2")
    C2: float = Field(ge=0.0, description="H(kappa) <= C2 eps kappa - |grad tau|^2")
    pairs: int
    points: int
    skipped_eps: int = Field(description="Points with eps below the fitting floor")
    skipped_kappa: int


class MonotonicityReport(_Report):
    steps: int
    max_increase: float
    euler_constant: float = Field(description="max (E(t+dt) - E(t)) / dt^2 over the series, floored at 0")
    tol: float
    passed: bool


# ==================== Energies ====================

def _cell_volume(state: FlowState) -> float:
    return model_for(state.kind, state.structure).cell_volume(state.grid)


def densities(state: FlowState) -> Tuple[ScalarField, ScalarField]:
    """Cached (eps, kappa), computed when the state carries none."""
    if state.eps is not None and state.kappa is not None:
        return state.eps, state.kappa
    model = model_for(state.kind, state.structure)
    grid = state.grid
    values = model.pack(state.structure)
    rhs = model.rhs(values, grid)
    return (ScalarField(grid=grid, values=model.energy_density(values, grid)),
            ScalarField(grid=grid, values=model.kinetic_density(values, rhs, grid)))


def energy(state: FlowState) -> Tuple[float, float, ScalarField, ScalarField]:
    """
    Dirichlet and kinetic energy of a flow state.

    Args:
        state: Flow state (caches are used when present)

    Returns:
        (E, K, eps_field, kappa_field) with E = sum eps * cell volume and
        K = sum kappa * cell volume
    """
    eps, kappa = densities(state)
    cv = _cell_volume(state)
    return float(np.sum(eps.values) * cv), float(np.sum(kappa.values) * cv), eps, kappa


def constraint_drift(state: FlowState) -> float:
    model = model_for(state.kind, state.structure)
    return model.constraint_drift(model.pack(state.structure))


def record_for(state: FlowState, harmonic_residual: bool = True, entropy_horizon: Optional[float] = None,
               entropy_center: Optional[Sequence[float]] = None) -> DiagnosticsRecord:
    """Build the diagnostics record of one sample."""
    e, k, eps, _ = energy(state)
    residual = None
    if state.kind == FlowKind.G2 and harmonic_residual:
        residual = harmonic_map_residual(state.structure, drift_tol=float("inf")).max_norm()
    entropy_f = None
    if entropy_horizon is not None and not state.is_homogeneous and state.t < entropy_horizon:
        entropy_f = entropy(state, state.t, entropy_horizon, entropy_center)
    return DiagnosticsRecord(
        t=state.t,
        E=e,
        K=k,
        eps_max=float(np.max(eps.values)),
        constraint_drift=constraint_drift(state),
        residual_harmonic_map=residual,
        entropy_F=entropy_f,
    )


# ==================== Series checks ====================

def _series(records: Sequence[DiagnosticsRecord], attr: str) -> np.ndarray:
    return np.array([getattr(r, attr) for r in records], dtype=float)


def uniform_prefix(records: Sequence[DiagnosticsRecord], rtol: float = 1e-6) -> List[DiagnosticsRecord]:
    """Leading records sampled at the spacing of the first two; drops a trailing off-interval sample."""
    records = list(records)
    if len(records) < 2:
        return records
    dt = records[1].t - records[0].t
    out = records[:2]
    for prev, cur in zip(records[1:], records[2:]):
        if abs((cur.t - prev.t) - dt) > rtol * abs(dt):
            break
        out.append(cur)
    return out


def energy_identity_tolerance(h: float, dt: float, c_id: Optional[float] = None) -> float:
    """C_id (h^2 + dt), the tolerance of the discrete energy identity at resolution (h, dt)."""
    c_id = get_config().c_id if c_id is None else c_id
    return c_id * (h * h + dt)


def check_energy_identity(records: Sequence[DiagnosticsRecord], h: float = 0.0, dt: Optional[float] = None,
                          tolerance: Optional[float] = None) -> EnergyIdentityReport:
    """
    Compare central differences of E with -2K at interior samples.

    Args:
        records: Diagnostics series at a fixed sample interval
        h: Grid spacing of the run (0 for the S^3 model)
        dt: Timestep of the run; the sample spacing when unknown
        tolerance: Fixed relative tolerance replacing C_id (h^2 + dt)

    Returns:
        EnergyIdentityReport

    Raises:
        TooShortSeries: fewer than 3 uniformly spaced samples
    """
    validator = SeriesValidator()
    ok, message = validator.validate_times([r.t for r in records])
    if not ok:
        raise TooShortSeries(message)
    series = uniform_prefix(records)
    ok, message = validator.validate_times([r.t for r in series])
    if not ok:
        raise TooShortSeries(f"uniformly spaced part: {message}")

    t = _series(series, "t")
    e = _series(series, "E")
    k = _series(series, "K")
    spacing = float(t[1] - t[0])
    dt = spacing if dt is None else float(dt)
    tol = energy_identity_tolerance(h, dt) if tolerance is None else tolerance
    de = (e[2:] - e[:-2]) / (2.0 * spacing)
    target = -2.0 * k[1:-1]
    floor = 1e-9 * float(np.max(e)) + 1e-300
    errors = np.abs(de - target) / np.maximum(np.abs(target), floor)
    worst = int(np.argmax(errors))
    max_err = float(errors[worst])
    return EnergyIdentityReport(samples=len(errors), spacing=spacing, h=h, dt=dt, max_rel_error=max_err,
                                worst_t=float(t[1 + worst]), tolerance=tol, passed=max_err <= tol)


def check_blowup_bound(times: Sequence[float], eps_max: Sequence[float], eps0_bar: Optional[float] = None,
                       slack: Optional[float] = None) -> BoundCheckReport:
    """
    Fit the blow-up rate bound and the doubling time of a sup energy density series.

    C is the smallest value with eps_t <= eps0 / (1 - C eps0 t) at every sample,
    i.e. the maximum of (1 - eps0 / eps_t) / (eps0 t) over t > 0 (floored at 0).
    delta_hat is the first time eps_t >= 2 eps0, or the last time if that never
    happens. The check passes if C eps0 delta_hat <= 1/2 + slack.

    Args:
        times: Sample times
        eps_max: Sup energy density at each time
        eps0_bar: Initial sup density (defaults to the first sample)
        slack: Added to 1/2 (defaults to the configured doubling_slack)

    Raises:
        TooShortSeries: empty series
    """
    t = np.asarray(times, dtype=float)
    eps = np.asarray(eps_max, dtype=float)
    if t.size == 0 or t.size != eps.size:
        raise TooShortSeries("blow-up check needs a non-empty series of matching times and values")
    slack = get_config().doubling_slack if slack is None else slack
    eps0 = float(eps[0]) if eps0_bar is None else float(eps0_bar)
    t0 = float(t[0])
    elapsed = t - t0
    horizon = float(elapsed[-1])

    c = 0.0
    if eps0 > 0.0:
        mask = (elapsed > 0.0) & (eps > 0.0)
        if np.any(mask):
            c = max(0.0, float(np.max((1.0 - eps0 / eps[mask]) / (eps0 * elapsed[mask]))))

    hits = np.nonzero(eps >= 2.0 * eps0)[0] if eps0 > 0.0 else np.array([], dtype=int)
    doubled = bool(hits.size)
    delta_hat = float(elapsed[hits[0]]) if doubled else horizon
    product = c * eps0 * delta_hat
    bound = 0.5 + slack
    flags = {"finite_C": bool(np.isfinite(c)), "doubling": product <= bound}

    quarter = max(0, int(0.75 * (eps.size - 1)))
    envelope = bool(eps.size >= 2 and eps[-1] >= np.max(eps) and eps[-1] > eps[quarter])

    return BoundCheckReport(C=c, delta_hat=delta_hat, doubled=doubled, eps0_bar=eps0, horizon=horizon,
                            product=product, margin=bound - product, flags=flags,
                            envelope_growing=envelope, passed=all(flags.values()))


def check_records_blowup_bound(records: Sequence[DiagnosticsRecord], slack: Optional[float] = None) -> BoundCheckReport:
    return check_blowup_bound(_series(records, "t"), _series(records, "eps_max"), slack=slack)


def check_energy_monotonicity(records: Sequence[DiagnosticsRecord], tol: float = 1e-12) -> MonotonicityReport:
    """
    Check that E never increases by more than tol * E(0) between samples.

    Also reports the Euler constant c with E(t + dt) <= E(t) + c dt^2.
    """
    ok, message = SeriesValidator().validate_times([r.t for r in records], min_samples=2)
    if not ok:
        raise TooShortSeries(message)
    t = _series(records, "t")
    e = _series(records, "E")
    increases = np.diff(e)
    steps = np.diff(t)
    max_inc = float(np.max(increases))
    euler_c = max(0.0, float(np.max(increases / steps ** 2)))
    allowed = tol * max(float(e[0]), 1e-300)
    return MonotonicityReport(steps=len(increases), max_increase=max_inc, euler_constant=euler_c,
                              tol=tol, passed=max_inc <= allowed)


# ==================== Heat sub-solution fits ====================

def _grad_sq(rep: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.zeros(grid.sizes)
    axes = tuple(range(grid.n, rep.ndim))
    for a in grid.active_axes:
        out += np.sum(partial_array(rep, grid, a) ** 2, axis=axes)
    return out


def fit_heat_subsolution(states: Sequence[FlowState], floor: float = 1e-14) -> HeatFitReport:
    """
    Fit the constants of the two heat inequalities along consecutive states.

    With H(f) = (f(t + dt) - f(t)) / dt - L f(t):
        H(eps)   <= C1 eps (eps + 1) - |grad T|^2
        H(kappa) <= C2 eps kappa     - |grad tau|^2
    where T and tau are the torsion and tension representations of the kind.
    The smallest C1, C2 >= 0 over all sampled points are reported; points whose
    eps (or eps * kappa) lies below `floor` are skipped and counted.

    Raises:
        TooShortSeries: fewer than 2 states
        DimensionMismatch: states on different grids or of different kinds
    """
    if len(states) < 2:
        raise TooShortSeries("heat sub-solution fit needs at least 2 states")
    grid, kind = states[0].grid, states[0].kind
    c1 = c2 = 0.0
    skipped_eps = skipped_kappa = points = 0
    for s0, s1 in zip(states[:-1], states[1:]):
        if s1.grid != grid or s1.kind != kind:
            raise DimensionMismatch("heat sub-solution fit needs states of one kind on one grid")
        dt = s1.t - s0.t
        if not dt > 0.0:
            raise ValueError("states must be ordered by strictly increasing time")
        eps0, kappa0 = densities(s0)
        eps1, kappa1 = densities(s1)
        e0, k0 = eps0.values, kappa0.values

        model = model_for(kind, s0.structure)
        if s0.is_homogeneous:
            grad_t = np.zeros(grid.sizes)
            grad_tau = np.zeros(grid.sizes)
        else:
            values = model.pack(s0.structure)
            grad_t = _grad_sq(model.torsion_rep(values, grid), grid)
            grad_tau = _grad_sq(model.tension_rep(values, model.rhs(values, grid)), grid)

        h_eps = (eps1.values - e0) / dt - laplacian_array(e0, grid)
        h_kappa = (kappa1.values - k0) / dt - laplacian_array(k0, grid)

        mask = e0 > floor
        skipped_eps += int(np.count_nonzero(~mask))
        if np.any(mask):
            ratio = (h_eps[mask] + grad_t[mask]) / (e0[mask] * (e0[mask] + 1.0))
            c1 = max(c1, float(np.max(ratio)))
        prod = e0 * k0
        mask = prod > floor
        skipped_kappa += int(np.count_nonzero(~mask))
        if np.any(mask):
            c2 = max(c2, float(np.max((h_kappa[mask] + grad_tau[mask]) / prod[mask])))
        points += e0.size

    return HeatFitReport(C1=c1, C2=c2, pairs=len(states) - 1, points=points,
                         skipped_eps=skipped_eps, skipped_kappa=skipped_kappa)


# ==================== Entropy ====================

def _periodic_gaussian(x: np.ndarray, length: float, v: float, tail_tol: float) -> np.ndarray:
    """(4 pi v)^(-1/2) sum_k exp(-(x + k L)^2 / 4v), shells added until they drop below tail_tol."""
    total = np.exp(-x ** 2 / (4.0 * v))
    max_shift = max(1, ceil(sqrt(4.0 * v * -np.log(tail_tol)) / length) + 2)
    for k in range(1, max_shift + 1):
        shell = np.exp(-(x + k * length) ** 2 / (4.0 * v)) + np.exp(-(x - k * length) ** 2 / (4.0 * v))
        total = total + shell
        if np.max(shell) < tail_tol:
            break
    return total / sqrt(4.0 * pi * v)


def heat_kernel(grid: GridSpec, v: float, center: Optional[Sequence[float]] = None,
                tail_tol: Optional[float] = None) -> np.ndarray:
    """
    Periodized Gaussian heat kernel of variance parameter v on the grid.

    Active axes carry the periodized Gaussian centered at `center`; inactive
    axes carry the constant 1/L so the kernel integrates to 1 under the
    midpoint rule.

    Returns:
        Array of shape grid.sizes
    """
    if not v > 0.0:
        raise ValueError(f"heat kernel needs v > 0, got {v}")
    tail_tol = get_config().kernel_tail_tol if tail_tol is None else tail_tol
    center = (0.0,) * grid.n if center is None else tuple(center)
    if len(center) != grid.n:
        raise DimensionMismatch(f"center needs {grid.n} coordinates, got {len(center)}")
    kernel = np.ones(grid.sizes)
    for axis in range(grid.n):
        length = grid.axis_lengths[axis]
        if not grid.active[axis]:
            kernel = kernel / length
            continue
        x = grid.coordinate(axis) - center[axis]
        kernel = kernel * _periodic_gaussian(x, length, v, tail_tol)
    return kernel


def entropy_functional(density: np.ndarray, grid: GridSpec, t: float, horizon: float,
                       center: Optional[Sequence[float]] = None) -> float:
    """
    F(t) = (T - t)/2 * integral of Theta_t * density, Theta_t the heat kernel with v = T - t.

    Raises:
        ValueError: if t >= horizon
    """
    if not t < horizon:
        raise ValueError(f"entropy needs t < horizon, got t = {t}, T = {horizon}")
    v = horizon - t
    kernel = heat_kernel(grid, v, center)
    return 0.5 * v * float(np.sum(kernel * np.asarray(density)) * grid.cell_volume)


def entropy(state: FlowState, t: float, horizon: float, center: Optional[Sequence[float]] = None) -> float:
    """Entropy functional of a flow state, weighting |d^V sigma|^2 = 2 eps."""
    eps, _ = densities(state)
    return entropy_functional(2.0 * eps.values, state.grid, t, horizon, center)
