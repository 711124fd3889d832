"""
Explicit time stepping of the harmonic section flows.

This module provides:
- step: one Euler or RK4 step followed by retraction and cache refresh
- g2_step: the isometric G2 step with metric drift monitoring
- retract: per-kind projection of a raw field onto its constraint set
- run_flow: the sequential driver with convergence and blow-up detection
"""

from typing import Callable, List, Optional, Sequence

import numpy as np

from infrastructure.errors import CflViolation, ConstraintBlowup, MetricDrift, NonFinite, NonPositiveForm
from infrastructure.grid import ScalarField
from infrastructure.validators import StructureValidator
from flows.diagnostics import record_for
from flows.state import (
    DiagnosticsRecord,
    FlowKind,
    FlowResult,
    FlowState,
    RetractionMethod,
    RunHeader,
    RunOutcome,
    Scheme,
    StepperConfig,
    StructureField,
)
from flows.structures import StructureModel, cfl_timestep, model_for


Observer = Callable[[FlowState], None]


def resolve_timestep(state: FlowState, cfg: StepperConfig) -> float:
    """
    Timestep of a run: cfg.dt if set, else the CFL bound.

    Grids without an active axis (the S^3 model) have no stability bound;
    an unset dt then defaults to cfg.cfl.

    Raises:
        CflViolation: if cfg.dt exceeds the bound and enforce_cfl is set
    """
    model = model_for(state.kind, state.structure)
    bound = cfl_timestep(model, state.grid, cfg.cfl)
    if cfg.dt is None:
        return bound if np.isfinite(bound) else cfg.cfl
    if cfg.enforce_cfl and cfg.dt > bound * (1.0 + 1e-12):
        raise CflViolation(f"dt = {cfg.dt:.3e} exceeds the CFL bound {bound:.3e} (cfl = {cfg.cfl})")
    return cfg.dt


def with_caches(state: FlowState) -> FlowState:
    """Refresh the cached energy and kinetic densities."""
    model = model_for(state.kind, state.structure)
    grid = state.grid
    values = model.pack(state.structure)
    rhs = model.rhs(values, grid)
    eps = ScalarField(grid=grid, values=model.energy_density(values, grid))
    kappa = ScalarField(grid=grid, values=model.kinetic_density(values, rhs, grid))
    return state.model_copy(update={"eps": eps, "kappa": kappa})


def _integrate(model: StructureModel, values: np.ndarray, grid, dt: float, scheme: Scheme) -> np.ndarray:
    if scheme == Scheme.EULER:
        return values + dt * model.rhs(values, grid)
    k1 = model.rhs(values, grid)
    k2 = model.rhs(values + 0.5 * dt * k1, grid)
    k3 = model.rhs(values + 0.5 * dt * k2, grid)
    k4 = model.rhs(values + dt * k3, grid)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_metric(model: StructureModel, values: np.ndarray, drift_tol: float) -> None:
    try:
        drift = model.constraint_drift(values)
    except NonPositiveForm as e:
        raise MetricDrift(f"3-form left the positive cone: {e}") from e
    ok, message = StructureValidator().validate_metric_drift(drift, drift_tol)
    if not ok:
        raise MetricDrift(message)


def step(state: FlowState, cfg: StepperConfig, dt: Optional[float] = None) -> FlowState:
    """
    Advance a flow state by one timestep.

    Args:
        state: Current state
        cfg: Stepper configuration
        dt: Resolved timestep (defaults to resolve_timestep(state, cfg))

    Returns:
        New FlowState with t and step advanced and caches refreshed

    Raises:
        CflViolation: dt above the stability bound
        NonFinite: the integrated values are not finite
        ConstraintBlowup: the pre-retraction drift exceeds repair_tol
        MetricDrift: G2 metric drift reached drift_tol
    """
    dt = resolve_timestep(state, cfg) if dt is None else dt
    model = model_for(state.kind, state.structure)
    grid = state.grid
    values = _integrate(model, model.pack(state.structure), grid, dt, cfg.scheme)
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"non-finite values after step {state.step + 1} at t = {state.t + dt:.6g}")

    method = cfg.retraction or model.default_retraction
    if state.kind == FlowKind.G2:
        _check_metric(model, values, cfg.drift_tol)
    elif method == RetractionMethod.POLAR:
        drift = model.constraint_drift(values)
        if drift > cfg.repair_tol:
            raise ConstraintBlowup(
                f"constraint drift {drift:.3e} before retraction exceeds repair_tol {cfg.repair_tol:.1e}"
            )
        values = model.retract(values)

    advanced = state.model_copy(update={
        "structure": model.unpack(values, grid),
        "t": state.t + dt,
        "step": state.step + 1,
    })
    return with_caches(advanced)


def g2_step(state: FlowState, cfg: StepperConfig, dt: Optional[float] = None) -> FlowState:
    """One step of the isometric G2 flow d/dt phi = X ⌟ psi, X the discrete div T."""
    if state.kind != FlowKind.G2:
        raise ValueError(f"g2_step needs a G2 state, got {state.kind.value}")
    return step(state, cfg, dt)


def retract(kind: FlowKind, raw: StructureField) -> StructureField:
    """
    Project a raw field back onto its constraint set.

    Frames use the polar factor, J is skew-symmetrized then polar-normalized,
    (xi, theta) are normalized and restricted before the lift is retracted;
    G2 fields are returned unchanged.
    """
    model = model_for(kind, raw)
    grid = raw.grid if hasattr(raw, "grid") else None
    return model.unpack(model.retract(model.pack(raw)), grid)


def tension_sup(state: FlowState) -> float:
    """‖tau^V‖_inf = max sqrt(2 kappa)."""
    if state.kappa is None:
        state = with_caches(state)
    return float(np.sqrt(2.0 * np.max(state.kappa.values)))


def run_flow(initial: FlowState, cfg: StepperConfig, observer: Optional[Observer] = None,
             harmonic_residual: bool = True, entropy_horizon: Optional[float] = None,
             entropy_center: Optional[Sequence[float]] = None) -> FlowResult:
    """
    Run a flow until convergence, blow-up or max_steps.

    Args:
        initial: Initial state
        cfg: Stepper configuration
        observer: Called with every accepted state
        harmonic_residual: Record the harmonic-map residual (G2 only)
        entropy_horizon: Record the entropy functional with this horizon T
        entropy_center: Kernel center (grid origin by default)

    Returns:
        FlowResult with one record per sample interval, the final state and the run header

    Raises:
        FlowError: as step
    """
    state = with_caches(initial)
    dt = resolve_timestep(state, cfg)
    eps0 = float(np.max(state.eps.values))
    header = RunHeader(kind=state.kind, h=state.grid.h_max, dt=dt, sample_interval=cfg.sample_interval)
    records: List[DiagnosticsRecord] = []

    def sample(s: FlowState) -> None:
        records.append(record_for(s, harmonic_residual=harmonic_residual,
                                  entropy_horizon=entropy_horizon, entropy_center=entropy_center))

    sample(state)
    if tension_sup(state) < cfg.stop_tolerance:
        return FlowResult(records=records, final_state=state, outcome=RunOutcome.CONVERGED, steps=0,
                          message="initial data is a fixed point", header=header)

    outcome = RunOutcome.MAX_STEPS
    message = f"reached max_steps = {cfg.max_steps}"
    while state.step < cfg.max_steps:
        state = step(state, cfg, dt)
        sampled = state.step % cfg.sample_interval == 0
        if sampled:
            sample(state)
        if observer is not None:
            observer(state)

        if tension_sup(state) < cfg.stop_tolerance:
            outcome = RunOutcome.CONVERGED
            message = f"tension below {cfg.stop_tolerance:.1e} after {state.step} steps"
            break
        eps_max = float(np.max(state.eps.values))
        if eps0 > 0.0 and eps_max > cfg.blowup_factor * eps0:
            outcome = RunOutcome.BLOWUP
            message = f"sup energy density {eps_max:.3e} exceeded {cfg.blowup_factor:.1e} x initial"
            break

    if records[-1].t != state.t:
        sample(state)
    return FlowResult(records=records, final_state=state, outcome=outcome, steps=state.step, message=message,
                      header=header)
