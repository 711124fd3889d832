"""
Test script for the harmonic section flows.

This script tests:
1. Right-hand sides: fixed points, tangency and explicit-formula agreement
2. Retraction onto the constraint sets
3. Discrete energy gradients along random orbit curves and coefficient directions
4. Single steps: stationarity, energy decrease, scheme order
5. Failure modes: CFL violation, non-finite values, constraint blow-up, metric drift
6. Complete runs on line and multi-axis grids: convergence, the S^3 fixed point,
   the energy identity under refinement and monotonicity
"""

import sys
from math import pi
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from infrastructure.errors import CflViolation, ConstraintBlowup, ConstraintViolation, MetricDrift, NonFinite
from infrastructure.g2 import energy_gradient_array, g2_pointwise_rhs_array, g2_rhs_array
from infrastructure.grid import S3_VOLUME, GridSpec
from flows.diagnostics import check_energy_identity, check_energy_monotonicity, energy
from flows.initial import (
    constant_state,
    g2_direction_generator,
    hopf_state,
    mode_state,
    noise_state,
    plane_generator,
)
from flows.retraction import (
    complex_drift,
    contact_drift,
    frame_drift,
    lift_contact,
    retract_complex,
    retract_contact,
    retract_frames,
)
from flows.state import ACSField, FlowKind, FrameField, RunOutcome, Scheme, StepperConfig
from flows.stepper import g2_step, resolve_timestep, retract, run_flow, step, tension_sup
from flows.structures import (
    acs_rhs,
    acs_tension_m,
    acts_energy_density_split,
    acts_rhs,
    acts_xi_rhs_explicit,
    cfl_timestep,
    energy_gradient_check,
    g2_diffusion_constant,
    model_for,
    parallelism_rhs,
    parallelism_rhs_explicit,
    random_generators,
)


GRIDS = {
    FlowKind.PARALLELISM: GridSpec.torus((16, 1, 1)),
    FlowKind.ACS: GridSpec.torus((16, 1, 1, 1)),
    FlowKind.ACTS: GridSpec.torus((16, 1, 1)),
    FlowKind.G2: GridSpec.torus((16, 1, 1, 1, 1, 1, 1)),
}


def _rng(seed: int = 5) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def _mode_generators(state, amplitude: float = 0.5) -> np.ndarray:
    """Orbit generators s(x) beta along the mode direction of mode_state."""
    grid = state.grid
    model = model_for(state.kind, state.structure)
    if state.kind == FlowKind.G2:
        beta = g2_direction_generator(0)
    else:
        beta = plane_generator(model.group_dim)
    s = amplitude * np.sin(2.0 * pi * grid.coordinate(0) / grid.axis_lengths[0])
    return np.broadcast_to(s, grid.sizes)[..., None, None] * beta


# ==================== Right-hand sides ====================

def test_fixed_points():
    """Constant structures are torsion free and stationary."""
    print("[TEST] Fixed Points...")
    for kind, grid in GRIDS.items():
        state = constant_state(kind, grid)
        model = model_for(kind, state.structure)
        values = model.pack(state.structure)
        assert np.max(np.abs(model.rhs(values, grid))) == 0.0, kind
        assert np.max(model.energy_density(values, grid)) == 0.0, kind
    print("   [PASS] rhs = 0 and eps = 0 for all four kinds")


def test_parallelism_rhs():
    print("\n[TEST] Parallelism rhs...")
    grid = GridSpec.torus((32, 1, 1))
    frame = mode_state(FlowKind.PARALLELISM, grid, amplitude=0.3).structure
    rhs = parallelism_rhs(frame).values
    tangent = np.swapaxes(frame.values, -1, -2) @ rhs
    assert np.max(np.abs(tangent + np.swapaxes(tangent, -1, -2))) < 1e-12
    assert _rel(parallelism_rhs_explicit(frame), rhs) < 0.05

    bad = FrameField(grid=grid, values=1.1 * frame.values)
    with pytest.raises(ConstraintViolation):
        parallelism_rhs(bad)
    print("   [PASS] S^T rhs is skew and matches L S + S G to O(h^2)")


def test_acs_rhs():
    print("\n[TEST] Almost Complex rhs...")
    j = mode_state(FlowKind.ACS, GridSpec.torus((16, 1, 1, 1)), amplitude=0.3).structure
    rhs = acs_rhs(j).values
    jv = j.values
    assert np.max(np.abs(rhs)) > 1e-3
    assert np.max(np.abs(rhs + np.swapaxes(rhs, -1, -2))) < 1e-12
    assert np.max(np.abs(jv @ rhs + rhs @ jv)) < 1e-12
    assert np.allclose(acs_tension_m(j), 0.5 * jv @ rhs, atol=1e-12)

    bad = ACSField(grid=j.grid, rows=4, cols=4, values=1.1 * jv)
    with pytest.raises(ConstraintViolation):
        acs_rhs(bad)
    print("   [PASS] rhs is skew, anticommutes with J and matches -1/4 [L J, J]")


def test_acts_rhs():
    print("\n[TEST] Almost Contact rhs...")
    field = mode_state(FlowKind.ACTS, GridSpec.torus((32, 1, 1)), amplitude=0.3).structure
    xi_rhs, theta_rhs = acts_rhs(field)
    assert np.max(np.abs(np.sum(xi_rhs.values * field.xi, axis=-1))) < 1e-12
    assert _rel(acts_xi_rhs_explicit(field), xi_rhs.values) < 0.05

    lifted = lift_contact(field.xi, field.theta)
    model = model_for(FlowKind.ACTS, field)
    lifted_eps = model.energy_density(lifted, field.grid)
    assert _rel(acts_energy_density_split(field), lifted_eps) < 0.05
    assert theta_rhs.values.shape == (32, 1, 1, 3, 3)
    print("   [PASS] xi-rhs is orthogonal to xi and matches the explicit formula")


def test_acts_decoupled_reeb_field():
    """A mode that only rotates xi^perp leaves the Reeb field at rest."""
    print("\n[TEST] Decoupled Reeb Field...")
    field = mode_state(FlowKind.ACTS, GridSpec.torus((16, 1, 1, 1, 1)), amplitude=0.3, plane=[0, 2]).structure
    xi_rhs, theta_rhs = acts_rhs(field)
    assert np.max(np.abs(xi_rhs.values)) < 1e-12
    assert np.max(np.abs(theta_rhs.values)) > 1e-3
    print("   [PASS] xi-rhs = 0 when xi is constant")


# ==================== Retraction ====================

def test_retraction():
    print("\n[TEST] Retraction...")
    rng = _rng(6)
    grid = GridSpec.torus((8, 1, 1))
    frames = noise_state(FlowKind.PARALLELISM, grid, amplitude=0.5).structure.values
    assert np.max(np.abs(retract_frames(frames) - frames)) < 1e-13

    noise = rng.standard_normal(frames.shape)
    noise *= 1e-3 / np.linalg.norm(noise, axis=(-2, -1), keepdims=True)
    repaired = retract_frames(frames + noise)
    assert frame_drift(repaired) < 1e-12
    assert np.all(np.linalg.det(repaired) > 0.0)
    assert np.max(np.abs(repaired - (frames + noise))) < 2e-3

    j = mode_state(FlowKind.ACS, GridSpec.torus((8, 1, 1, 1)), amplitude=0.5).structure.values
    assert complex_drift(retract_complex(j + 1e-3 * rng.standard_normal(j.shape))) < 1e-12

    acts = mode_state(FlowKind.ACTS, grid, amplitude=0.5).structure
    xi, theta = retract_contact(acts.xi + 1e-3 * rng.standard_normal(acts.xi.shape),
                                acts.theta + 1e-3 * rng.standard_normal(acts.theta.shape))
    assert contact_drift(xi, theta) < 1e-12
    print("   [PASS] Feasible input unchanged; perturbed input repaired to 1e-12")


def test_retract_structure():
    print("\n[TEST] Retract Structure...")
    grid = GridSpec.torus((8, 1, 1))
    frames = constant_state(FlowKind.PARALLELISM, grid).structure
    raw = frames.with_values(frames.values * 1.001)
    assert frame_drift(retract(FlowKind.PARALLELISM, raw).values) < 1e-12
    phi = constant_state(FlowKind.G2, GRIDS[FlowKind.G2]).structure
    assert np.array_equal(retract(FlowKind.G2, phi).values, phi.values)
    print("   [PASS] retract() repairs frames and leaves G2 fields unchanged")


# ==================== Gradients ====================

def test_energy_gradient_random_directions():
    """dE/ds along exp(s Omega) matches -<rhs, Omega . sigma> for random configurations and directions."""
    print("\n[TEST] Energy Gradients in Random Directions...")
    rng = _rng(7)
    cases = list(GRIDS.items()) + [(FlowKind.G2, GridSpec.torus((6, 6, 1, 1, 1, 1, 1)))]
    for kind, grid in cases:
        worst = 0.0
        for seed in range(5):
            state = noise_state(kind, grid, amplitude=0.3, cutoff=2, seed=seed)
            model = model_for(kind, state.structure)
            values = model.pack(state.structure)
            for _ in range(20):
                generators = random_generators(rng, grid.sizes, model.group_dim)
                measured, predicted = energy_gradient_check(model, values, grid, generators)
                error = abs(measured - predicted) / abs(predicted)
                assert error <= 0.01, (kind, seed, error)
                worst = max(worst, error)
        print(f"   - {kind.value} on {grid.sizes}: worst relative error {worst:.2e} over 100 directions")
    print("   [PASS] Discrete gradients agree to 1%")


def test_energy_gradient_g2():
    print("\n[TEST] G2 Energy Gradient...")
    grid = GridSpec.torus((64, 1, 1, 1, 1, 1, 1))
    state = mode_state(FlowKind.G2, grid, amplitude=0.2)
    model = model_for(FlowKind.G2)
    measured, predicted = energy_gradient_check(model, model.pack(state.structure), grid, _mode_generators(state))
    assert abs(predicted) > 0.0
    assert abs(measured - predicted) <= 1e-6 * abs(predicted)
    print(f"   [PASS] dE/ds = {measured:.6e}, -<rhs, V> = {predicted:.6e}")


def test_g2_coefficient_gradient():
    """energy_gradient_array is the gradient of E in every coefficient direction, on or off the orbit."""
    print("\n[TEST] G2 Coefficient Gradient...")
    grid = GridSpec.torus((6, 5, 1, 1, 1, 1, 1))
    state = noise_state(FlowKind.G2, grid, amplitude=0.3, cutoff=2, seed=2)
    model = model_for(FlowKind.G2)
    phi = model.pack(state.structure)
    gradient = energy_gradient_array(phi, grid)
    rng = _rng(12)
    delta = 1e-5

    def energy_at(values: np.ndarray) -> float:
        return float(np.sum(model.energy_density(values, grid)) * grid.cell_volume)

    for _ in range(5):
        gamma = rng.standard_normal(phi.shape)
        measured = (energy_at(phi + delta * gamma) - energy_at(phi - delta * gamma)) / (2.0 * delta)
        predicted = float(np.sum(gradient * gamma)) * grid.cell_volume
        assert abs(measured - predicted) <= 1e-6 * abs(predicted)
    print("   [PASS] Central differences of E match cell volume * sum G . gamma")


def test_g2_rhs_against_pointwise_formula():
    """The gradient rhs and (div T) ⌟ psi differ by O(h^2)."""
    print("\n[TEST] G2 rhs against (div T) ⌟ psi...")
    gaps = []
    for size in (32, 64):
        grid = GridSpec.torus((size, 1, 1, 1, 1, 1, 1))
        phi = mode_state(FlowKind.G2, grid, amplitude=0.2).structure.values
        gaps.append(_rel(g2_pointwise_rhs_array(phi, grid), g2_rhs_array(phi, grid)))
    assert gaps[1] < 1e-2
    assert gaps[0] / gaps[1] > 3.0
    print(f"   [PASS] Relative gap {gaps[0]:.2e} -> {gaps[1]:.2e}")


def test_energy_gradient_s3():
    print("\n[TEST] S^3 Energy Gradient...")
    state = hopf_state()
    model = model_for(state.kind, state.structure)
    generators = random_generators(_rng(8), (), 3)
    measured, predicted = energy_gradient_check(model, model.pack(state.structure), state.grid, generators)
    assert abs(measured) < 1e-6 and abs(predicted) < 1e-10
    print("   [PASS] Homogeneous energy is flat along rotations")


# ==================== Steps ====================

def test_stationary_step():
    print("\n[TEST] Stationary Step...")
    for kind, grid in GRIDS.items():
        state = constant_state(kind, grid)
        cfg = StepperConfig()
        advanced = step(state, cfg)
        model = model_for(kind, state.structure)
        assert np.allclose(model.pack(advanced.structure), model.pack(state.structure), atol=1e-14), kind
        assert advanced.step == 1 and advanced.t > 0.0
    print("   [PASS] Constant structures stay put")


def test_euler_step_decreases_energy():
    print("\n[TEST] Euler Energy Decrease...")
    grid = GridSpec.torus((16, 1, 1))
    state = mode_state(FlowKind.PARALLELISM, grid, amplitude=0.05)
    cfg = StepperConfig(scheme=Scheme.EULER)
    # Euler drift is (dt |A|)^2 per step, which must stay under repair_tol
    dt = 0.25 * resolve_timestep(state, cfg)
    e0 = energy(state)[0]
    e1 = energy(step(state, cfg, dt))[0]
    assert e1 < e0
    print(f"   [PASS] E: {e0:.6e} -> {e1:.6e}")


def test_scheme_order():
    """Euler and RK4 differ by O(dt^2) after one step."""
    print("\n[TEST] Scheme Order...")
    grid = GridSpec.torus((16, 1, 1))
    state = mode_state(FlowKind.PARALLELISM, grid, amplitude=0.05)
    dt = 0.25 * resolve_timestep(state, StepperConfig())
    euler, rk4 = StepperConfig(scheme=Scheme.EULER), StepperConfig(scheme=Scheme.RK4)

    def gap(h: float) -> float:
        return float(np.max(np.abs(step(state, euler, h).structure.values - step(state, rk4, h).structure.values)))

    ratio = gap(dt) / gap(0.5 * dt)
    assert 3.0 < ratio < 5.0
    print(f"   [PASS] Halving dt shrinks the gap by {ratio:.3f}")


def test_cfl_violation():
    print("\n[TEST] CFL Violation...")
    state = mode_state(FlowKind.ACS, GRIDS[FlowKind.ACS])
    model = model_for(state.kind, state.structure)
    bound = cfl_timestep(model, state.grid, 0.5)
    assert abs(resolve_timestep(state, StepperConfig(cfl=0.5)) - bound) < 1e-15
    with pytest.raises(CflViolation):
        resolve_timestep(state, StepperConfig(dt=10.0 * bound, cfl=0.5))
    with pytest.raises(CflViolation):
        run_flow(state, StepperConfig(dt=10.0 * bound, cfl=0.5, max_steps=3))
    assert resolve_timestep(state, StepperConfig(dt=10.0 * bound, cfl=0.5, enforce_cfl=False)) == 10.0 * bound
    print("   [PASS] dt above the bound rejected unless enforcement is off")


def test_non_finite_step():
    print("\n[TEST] Non-Finite Step...")
    state = noise_state(FlowKind.PARALLELISM, GRIDS[FlowKind.PARALLELISM], amplitude=0.5, cutoff=3)
    cfg = StepperConfig(enforce_cfl=False)
    with np.errstate(all="ignore"):
        with pytest.raises(NonFinite):
            step(state, cfg, dt=1e200)
    print("   [PASS] Overflowing step rejected")


def test_constraint_blowup():
    print("\n[TEST] Constraint Blow-up...")
    state = noise_state(FlowKind.PARALLELISM, GRIDS[FlowKind.PARALLELISM], amplitude=1.0, cutoff=3)
    with pytest.raises(ConstraintBlowup):
        step(state, StepperConfig(scheme=Scheme.EULER))
    print("   [PASS] Step needing a large repair rejected")


def test_g2_metric_drift():
    print("\n[TEST] G2 Metric Drift...")
    state = mode_state(FlowKind.G2, GRIDS[FlowKind.G2], amplitude=0.2)
    with pytest.raises(MetricDrift):
        g2_step(state, StepperConfig(scheme=Scheme.EULER, drift_tol=1e-14))
    advanced = g2_step(state, StepperConfig())
    assert advanced.step == 1
    with pytest.raises(ValueError):
        g2_step(constant_state(FlowKind.ACS, GRIDS[FlowKind.ACS]), StepperConfig())
    print("   [PASS] Drift beyond drift_tol aborts the G2 step")


def test_g2_diffusion_constant():
    """The linearized G2 rhs is P7 L, whose largest eigenvalue on a line grid is n / h^2."""
    print("\n[TEST] G2 Stability Constant...")
    lam = g2_diffusion_constant()
    assert abs(lam - 1.0) < 1e-3
    print(f"   [PASS] Lambda = {lam:.6f}")


# ==================== Runs ====================

def test_converged_run():
    print("\n[TEST] Converged Run...")
    grid = GridSpec.torus((16, 1, 1))
    state = noise_state(FlowKind.PARALLELISM, grid, amplitude=0.05, cutoff=2, seed=9)
    cfg = StepperConfig(max_steps=5000, stop_tolerance=1e-6, sample_interval=10)
    result = run_flow(state, cfg)
    assert result.outcome == RunOutcome.CONVERGED
    assert result.records[-1].E < 1e-8 * result.records[0].E
    assert result.records[-1].constraint_drift < 1e-12
    assert tension_sup(result.final_state) < 1e-6
    assert check_energy_monotonicity(result.records).passed
    print(f"   [PASS] Converged after {result.steps} steps, E = {result.records[-1].E:.3e}")


def test_s3_run_converges_immediately():
    print("\n[TEST] S^3 Fixed Point...")
    result = run_flow(hopf_state(), StepperConfig())
    assert result.outcome == RunOutcome.CONVERGED
    assert result.steps == 0 and len(result.records) == 1
    assert abs(result.records[0].E - 3.0 * S3_VOLUME) < 1e-10
    assert abs(result.records[0].eps_max - 3.0) < 1e-12
    print("   [PASS] Hopf frame is a fixed point with E = 6 pi^2")


def test_energy_identity_on_run():
    print("\n[TEST] Energy Identity Along a Run...")
    grid = GridSpec.torus((32, 1, 1))
    state = mode_state(FlowKind.PARALLELISM, grid, amplitude=0.05)
    cfg = StepperConfig(max_steps=60, stop_tolerance=0.0)
    result = run_flow(state, cfg)
    assert result.outcome == RunOutcome.MAX_STEPS
    assert len(result.records) == 61
    header = result.header
    assert header.kind == FlowKind.PARALLELISM and header.sample_interval == 1
    assert header.h == grid.spacing[0] and header.dt == resolve_timestep(state, cfg)
    report = check_energy_identity(result.records, h=header.h, dt=header.dt)
    assert report.passed
    assert report.max_rel_error < 0.01
    assert check_energy_monotonicity(result.records).passed
    print(f"   [PASS] max relative error {report.max_rel_error:.2e} (tolerance {report.tolerance:.2e})")


def _identity_report(result):
    return check_energy_identity(result.records, h=result.header.h, dt=result.header.dt)


def test_energy_identity_refinement():
    """Halving h and quartering dt shrinks the identity error at least threefold."""
    print("\n[TEST] Energy Identity under Refinement...")
    reports = []
    for size, steps in ((16, 40), (32, 160)):
        state = mode_state(FlowKind.PARALLELISM, GridSpec.torus((size, 1, 1)), amplitude=0.05)
        result = run_flow(state, StepperConfig(max_steps=steps, stop_tolerance=0.0))
        reports.append(_identity_report(result))
    coarse, fine = reports
    assert abs(fine.dt - coarse.dt / 4.0) < 1e-15
    assert abs(fine.tolerance - coarse.tolerance / 4.0) < 1e-12
    assert coarse.passed and fine.passed
    ratio = coarse.max_rel_error / fine.max_rel_error
    assert ratio >= 3.0
    print(f"   [PASS] error {coarse.max_rel_error:.2e} -> {fine.max_rel_error:.2e} (ratio {ratio:.1f})")


def test_energy_identity_g2_run():
    print("\n[TEST] Energy Identity on a G2 Run...")
    grid = GridSpec.torus((32, 1, 1, 1, 1, 1, 1))
    state = mode_state(FlowKind.G2, grid, amplitude=0.2)
    result = run_flow(state, StepperConfig(max_steps=40, stop_tolerance=0.0))
    report = _identity_report(result)
    assert report.passed
    assert report.max_rel_error < 1e-3
    assert check_energy_monotonicity(result.records).passed
    print(f"   [PASS] max relative error {report.max_rel_error:.2e} (tolerance {report.tolerance:.2e})")


MULTI_AXIS_GRIDS = {
    FlowKind.PARALLELISM: GridSpec.torus((8, 8, 8)),
    FlowKind.ACS: GridSpec.torus((8, 8, 1, 1)),
    FlowKind.ACTS: GridSpec.torus((8, 8, 8)),
    FlowKind.G2: GridSpec.torus((8, 8, 8, 1, 1, 1, 1)),
}


def test_seeded_runs_monotone():
    """Twelve noise runs on multi-axis grids decrease E and satisfy the energy identity."""
    print("\n[TEST] Seeded Runs...")
    for kind, grid in MULTI_AXIS_GRIDS.items():
        for seed in (1, 2, 3):
            state = noise_state(kind, grid, amplitude=0.1, cutoff=1, seed=seed)
            result = run_flow(state, StepperConfig(max_steps=20, stop_tolerance=0.0))
            assert result.outcome == RunOutcome.MAX_STEPS, (kind, seed)
            monotone = check_energy_monotonicity(result.records)
            assert monotone.passed, (kind, seed, monotone.max_increase)
            assert _identity_report(result).passed, (kind, seed)
            assert result.records[-1].E < result.records[0].E
        print(f"   - {kind.value} on {grid.sizes}: 3 seeds monotone")
    print("   [PASS] E never increases across 12 runs")


def test_frames_identity_on_cube():
    """Smooth frame run on 16^3 at half the CFL bound keeps the identity within 5%."""
    print("\n[TEST] Frame Run on 16^3...")
    grid = GridSpec.torus((16, 16, 16))
    state = noise_state(FlowKind.PARALLELISM, grid, amplitude=0.05, cutoff=1, seed=4)
    result = run_flow(state, StepperConfig(cfl=0.5, max_steps=40, stop_tolerance=0.0))
    report = _identity_report(result)
    assert report.tolerance < 0.06
    assert report.passed and report.max_rel_error < 0.05
    print(f"   [PASS] max relative error {report.max_rel_error:.2e} (tolerance {report.tolerance:.2e})")


def test_acs_small_amplitude_convergence():
    print("\n[TEST] Almost Complex Convergence...")
    state = mode_state(FlowKind.ACS, GRIDS[FlowKind.ACS], amplitude=0.01)
    result = run_flow(state, StepperConfig(max_steps=5000, stop_tolerance=1e-9, sample_interval=10))
    assert result.outcome == RunOutcome.CONVERGED
    assert result.records[-1].E < 1e-8 * result.records[0].E
    assert check_energy_monotonicity(result.records).passed
    print(f"   [PASS] Converged after {result.steps} steps, E = {result.records[-1].E:.3e}")


def test_observer_sees_every_step():
    print("\n[TEST] Observer...")
    seen = []
    state = mode_state(FlowKind.ACS, GRIDS[FlowKind.ACS], amplitude=0.05)
    result = run_flow(state, StepperConfig(max_steps=7, stop_tolerance=0.0, sample_interval=3),
                      observer=lambda s: seen.append(s.step))
    assert seen == list(range(1, 8))
    assert [round(r.t / resolve_timestep(state, StepperConfig())) for r in result.records] == [0, 3, 6, 7]
    print("   [PASS] Observer called per step; samples every 3 steps plus the final state")


def main():
    """Run all tests."""
    print("=" * 60)
    print("Harmonic Flows - Test Suite")
    print("=" * 60)

    tests = [
        ("Fixed Points", test_fixed_points),
        ("Parallelism rhs", test_parallelism_rhs),
        ("Almost Complex rhs", test_acs_rhs),
        ("Almost Contact rhs", test_acts_rhs),
        ("Decoupled Reeb Field", test_acts_decoupled_reeb_field),
        ("Retraction", test_retraction),
        ("Retract Structure", test_retract_structure),
        ("Energy Gradients in Random Directions", test_energy_gradient_random_directions),
        ("G2 Energy Gradient", test_energy_gradient_g2),
        ("G2 Coefficient Gradient", test_g2_coefficient_gradient),
        ("G2 rhs against (div T) ⌟ psi", test_g2_rhs_against_pointwise_formula),
        ("S^3 Energy Gradient", test_energy_gradient_s3),
        ("Stationary Step", test_stationary_step),
        ("Euler Energy Decrease", test_euler_step_decreases_energy),
        ("Scheme Order", test_scheme_order),
        ("CFL Violation", test_cfl_violation),
        ("Non-Finite Step", test_non_finite_step),
        ("Constraint Blow-up", test_constraint_blowup),
        ("G2 Metric Drift", test_g2_metric_drift),
        ("G2 Stability Constant", test_g2_diffusion_constant),
        ("Converged Run", test_converged_run),
        ("S^3 Fixed Point", test_s3_run_converges_immediately),
        ("Energy Identity Along a Run", test_energy_identity_on_run),
        ("Energy Identity under Refinement", test_energy_identity_refinement),
        ("Energy Identity on a G2 Run", test_energy_identity_g2_run),
        ("Seeded Runs", test_seeded_runs_monotone),
        ("Frame Run on 16^3", test_frames_identity_on_cube),
        ("Almost Complex Convergence", test_acs_small_amplitude_convergence),
        ("Observer", test_observer_sees_every_step),
    ]

    results = []
    for name, test_func in tests:
        try:
            test_func()
            results.append((name, True))
        except Exception as e:
            print(f"   [FAIL] {name}: {type(e).__name__}: {e}")
            results.append((name, False))

    print("\n" + "=" * 60)
    print("Test Summary")
    print("=" * 60)
    for name, passed in results:
        print(f"{'[PASS]' if passed else '[FAIL]'} - {name}")

    passed_count = sum(1 for _, p in results if p)
    print(f"\nTotal: {passed_count}/{len(results)} tests passed")

    if passed_count == len(results):
        print("\n[SUCCESS] All flow tests passed")
        return 0
    print(f"\n[WARNING] {len(results) - passed_count} test(s) failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())
