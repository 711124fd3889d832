"""
Test script for the diagnostics harness.

This script tests:
1. Energies of known configurations
2. The discrete energy identity check and its resolution-dependent tolerance
3. The blow-up rate and doubling-time fit
4. Energy monotonicity
5. Heat kernel, entropy functional and heat sub-solution fits
"""

import sys
from math import pi, sqrt
from pathlib import Path
from typing import List

import numpy as np
import pytest
from scipy.linalg import expm

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from infrastructure.config import get_config
from infrastructure.errors import TooShortSeries
from infrastructure.grid import GridSpec
from flows.diagnostics import (
    check_blowup_bound,
    check_energy_identity,
    check_energy_monotonicity,
    check_records_blowup_bound,
    energy,
    energy_identity_tolerance,
    entropy,
    entropy_functional,
    fit_heat_subsolution,
    heat_kernel,
    record_for,
    uniform_prefix,
)
from flows.initial import constant_state, g2_direction_generator, mode_state, model_values
from flows.state import DiagnosticsRecord, FlowKind, FlowState, RunOutcome, StepperConfig
from flows.stepper import run_flow, step
from flows.structures import model_for


def _records(t, e, k=None, eps=None):
    k = np.zeros_like(e) if k is None else k
    eps = np.ones_like(e) if eps is None else eps
    return [DiagnosticsRecord(t=float(a), E=float(b), K=float(c), eps_max=float(d), constraint_drift=0.0)
            for a, b, c, d in zip(t, e, k, eps)]


# ==================== Energies ====================

def test_mode_energy():
    """One sine mode of amplitude a along the (0, 2) plane has E = 4 pi^3 a^2."""
    print("[TEST] Mode Energy...")
    a = 0.05
    state = mode_state(FlowKind.PARALLELISM, GridSpec.torus((64, 1, 1)), amplitude=a)
    e, k, eps, _ = energy(state)
    expected = 4.0 * pi ** 3 * a ** 2
    assert abs(e - expected) < 0.01 * expected
    assert k > 0.0
    assert abs(float(np.max(eps.values)) - 0.5 * 2.0 * a ** 2) < 0.01 * a ** 2
    print(f"   [PASS] E = {e:.6f} (continuum {expected:.6f})")


def test_record_for():
    print("\n[TEST] Diagnostics Record...")
    record = record_for(constant_state(FlowKind.G2, GridSpec.torus((4, 1, 1, 1, 1, 1, 1))))
    assert record.E == 0.0 and record.K == 0.0 and record.eps_max == 0.0
    assert record.residual_harmonic_map == 0.0
    assert record.entropy_F is None

    record = record_for(mode_state(FlowKind.ACS, GridSpec.torus((8, 1, 1, 1))), entropy_horizon=1.0)
    assert record.residual_harmonic_map is None
    assert record.entropy_F is not None and record.entropy_F > 0.0
    print("   [PASS] Residual for G2 only, entropy when a horizon is set")


# ==================== Energy identity ====================

def test_energy_identity_exact_series():
    """E = K = exp(-2t) satisfies dE/dt = -2K."""
    print("\n[TEST] Energy Identity on an Exact Series...")
    t = 0.01 * np.arange(50)
    e = np.exp(-2.0 * t)
    report = check_energy_identity(_records(t, e, k=e), tolerance=0.05)
    assert report.passed
    assert report.samples == 48
    assert report.max_rel_error < 1e-3
    print(f"   [PASS] max relative error {report.max_rel_error:.2e}")


def test_energy_identity_stationary():
    print("\n[TEST] Energy Identity on a Stationary Series...")
    t = 0.1 * np.arange(5)
    report = check_energy_identity(_records(t, np.ones(5)), tolerance=0.05)
    assert report.passed and report.max_rel_error == 0.0
    print("   [PASS] Constant E with K = 0 passes with zero error")


def test_energy_identity_mismatch():
    print("\n[TEST] Energy Identity Mismatch...")
    t = 0.01 * np.arange(20)
    e = np.exp(-2.0 * t)
    report = check_energy_identity(_records(t, e, k=2.0 * e), tolerance=0.05)
    assert not report.passed
    assert abs(report.max_rel_error - 0.5) < 0.01
    print("   [PASS] K off by a factor 2 fails")


def test_energy_identity_too_short():
    print("\n[TEST] Short Series...")
    with pytest.raises(TooShortSeries):
        check_energy_identity(_records([0.0, 0.1], [1.0, 0.9]))
    with pytest.raises(TooShortSeries):
        check_energy_monotonicity(_records([0.0], [1.0]))
    print("   [PASS] Fewer than 3 samples rejected")


def test_uniform_prefix():
    """A trailing sample off the interval is dropped."""
    print("\n[TEST] Uniform Prefix...")
    records = _records([0.0, 0.1, 0.2, 0.3, 0.35], np.ones(5))
    assert [r.t for r in uniform_prefix(records)] == [0.0, 0.1, 0.2, 0.3]
    print("   [PASS] Final off-interval sample dropped")


def test_energy_identity_tolerance():
    """The tolerance C_id (h^2 + dt) tightens fourfold under (h, dt) -> (h/2, dt/4)."""
    print("\n[TEST] Energy Identity Tolerance...")
    assert abs(energy_identity_tolerance(0.2, 0.01, c_id=0.3) - 0.015) < 1e-15
    assert abs(energy_identity_tolerance(0.1, 0.0025, c_id=0.3) - 0.00375) < 1e-15
    assert abs(energy_identity_tolerance(0.2, 0.01) - get_config().c_id * 0.05) < 1e-15

    # K off by one percent
    t = 0.01 * np.arange(50)
    e = np.exp(-2.0 * t)
    records = _records(t, e, k=e / 1.01)
    coarse = check_energy_identity(records, h=0.2, dt=0.01)
    assert coarse.tolerance == energy_identity_tolerance(0.2, 0.01)
    assert (coarse.h, coarse.dt) == (0.2, 0.01)
    assert 0.0095 < coarse.max_rel_error < 0.0105
    assert coarse.passed
    fine = check_energy_identity(records, h=0.1, dt=0.0025)
    assert abs(fine.tolerance - coarse.tolerance / 4.0) < 1e-15
    assert not fine.passed

    # the sample spacing stands in for an unknown timestep
    assert check_energy_identity(records, h=0.2).dt == 0.01
    print(f"   [PASS] tolerance {coarse.tolerance:.4f} -> {fine.tolerance:.5f}, 1% error passes then fails")


# ==================== Blow-up bound ====================

def test_blowup_fit_exact_rate():
    """eps = 2 / (1 - t) saturates the bound with C = 1/2 and doubles at t = 1/2."""
    print("\n[TEST] Blow-up Fit...")
    t = np.arange(19) / 20.0
    eps = 2.0 / (1.0 - t)
    report = check_blowup_bound(t, eps, slack=0.25)
    assert abs(report.C - 0.5) < 1e-12
    assert report.doubled and report.delta_hat == 0.5
    assert abs(report.product - 0.5) < 1e-12
    assert report.passed
    assert report.envelope_growing
    print(f"   [PASS] C = {report.C:.6f}, delta_hat = {report.delta_hat}, product = {report.product:.3f}")


def test_blowup_fit_decaying():
    print("\n[TEST] Decaying Density...")
    t = np.arange(19) / 20.0
    report = check_blowup_bound(t, 2.0 / (1.0 + t))
    assert report.C == 0.0
    assert not report.doubled and abs(report.delta_hat - 0.9) < 1e-12
    assert report.passed and not report.envelope_growing
    print("   [PASS] C = 0 and delta_hat = horizon")


def test_blowup_fit_from_records():
    print("\n[TEST] Blow-up Fit from Records...")
    t = np.arange(10) / 20.0
    report = check_records_blowup_bound(_records(t, np.ones(10), eps=2.0 / (1.0 - t)))
    assert abs(report.C - 0.5) < 1e-12
    with pytest.raises(TooShortSeries):
        check_blowup_bound([], [])
    print("   [PASS] Records feed the same fit; empty series rejected")


def test_blowup_bound_on_g2_run():
    """A large-amplitude G2 mode run stays within the doubling bound."""
    print("\n[TEST] Blow-up Bound on a G2 Run...")
    grid = GridSpec.torus((64,) + (1,) * 6)
    state = mode_state(FlowKind.G2, grid, amplitude=1.0)
    result = run_flow(state, StepperConfig(max_steps=60, sample_interval=1))
    assert result.outcome != RunOutcome.BLOWUP
    report = check_records_blowup_bound(result.records)
    assert report.flags["finite_C"]
    assert not report.doubled
    assert report.product < 0.5
    assert report.passed and not report.envelope_growing
    print(f"   [PASS] eps0 = {report.eps0_bar:.3f}, C = {report.C:.3e}, product = {report.product:.3e}")


# ==================== Monotonicity ====================

def test_monotonicity():
    print("\n[TEST] Energy Monotonicity...")
    t = 0.1 * np.arange(6)
    assert check_energy_monotonicity(_records(t, np.exp(-t))).passed
    report = check_energy_monotonicity(_records(t, 1.0 + 0.01 * t))
    assert not report.passed
    assert report.max_increase > 0.0 and report.euler_constant > 0.0
    print("   [PASS] Decreasing series passes, increasing series fails")


# ==================== Heat kernel and entropy ====================

def test_heat_kernel_mass():
    print("\n[TEST] Heat Kernel Mass...")
    grid = GridSpec.torus((32, 32, 1))
    for v in (0.5, 2.0):
        kernel = heat_kernel(grid, v, center=(1.0, 2.0, 0.0))
        assert abs(float(np.sum(kernel)) * grid.cell_volume - 1.0) < 1e-10
        assert np.all(kernel > 0.0)
    with pytest.raises(ValueError):
        heat_kernel(grid, 0.0)
    print("   [PASS] Kernel integrates to 1 for v = 0.5 and v = 2")


def test_heat_kernel_lattice_sum():
    """Compare against a dense lattice sum over 41 periodic images."""
    print("\n[TEST] Heat Kernel Lattice Sum...")
    grid = GridSpec.torus((16, 1, 1))
    v, c = 0.7, 1.0
    length = grid.axis_lengths[0]
    x = grid.coordinate(0) - c
    oracle = sum(np.exp(-(x + k * length) ** 2 / (4.0 * v)) for k in range(-20, 21))
    oracle = oracle / sqrt(4.0 * pi * v) / (grid.axis_lengths[1] * grid.axis_lengths[2])
    kernel = heat_kernel(grid, v, center=(c, 0.0, 0.0))
    assert np.allclose(kernel, np.broadcast_to(oracle, grid.sizes), atol=1e-12)
    print("   [PASS] Periodized Gaussian matches the lattice sum")


def test_entropy_functional():
    print("\n[TEST] Entropy Functional...")
    grid = GridSpec.torus((16, 16, 1))
    density = np.full(grid.sizes, 3.0)
    f = entropy_functional(density, grid, t=0.25, horizon=1.0)
    assert abs(f - 0.5 * 0.75 * 3.0) < 1e-10

    frames = constant_state(FlowKind.PARALLELISM, grid)
    assert entropy(frames, 0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        entropy_functional(density, grid, t=1.0, horizon=1.0)
    print("   [PASS] Uniform density gives (T - t)/2 d; torsion-free structures have F = 0")


def test_entropy_gaussian_bump():
    """Entropy of a Gaussian bump against a dense lattice-sum kernel."""
    print("\n[TEST] Entropy of a Gaussian Bump...")
    grid = GridSpec.torus((24, 20, 1))
    center = (2.0, 3.5, 0.0)
    t, horizon = 0.4, 1.0
    v = horizon - t
    x = np.broadcast_to(grid.coordinate(0), grid.sizes)
    y = np.broadcast_to(grid.coordinate(1), grid.sizes)
    density = 2.0 * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / 0.5)

    oracle = np.full(grid.sizes, 1.0 / grid.axis_lengths[2])
    for axis, coord in ((0, x), (1, y)):
        length = grid.axis_lengths[axis]
        shifted = coord - center[axis]
        images = sum(np.exp(-(shifted + k * length) ** 2 / (4.0 * v)) for k in range(-20, 21))
        oracle = oracle * images / sqrt(4.0 * pi * v)
    expected = 0.5 * v * float(np.sum(oracle * density)) * grid.cell_volume

    f = entropy_functional(density, grid, t=t, horizon=horizon, center=center)
    assert abs(f - expected) < 1e-10 * expected
    print(f"   [PASS] F = {f:.10f} matches the lattice sum")


def test_heat_fit_constant_states():
    print("\n[TEST] Heat Fit on Fixed Points...")
    grid = GridSpec.torus((8, 1, 1))
    state = constant_state(FlowKind.PARALLELISM, grid)
    report = fit_heat_subsolution([state, step(state, StepperConfig())])
    assert report.C1 == 0.0 and report.C2 == 0.0
    assert report.skipped_eps == report.points == 8
    with pytest.raises(TooShortSeries):
        fit_heat_subsolution([state])
    print("   [PASS] All points skipped, constants 0")


def test_heat_fit_step_pair():
    print("\n[TEST] Heat Fit on a Step Pair...")
    state = mode_state(FlowKind.ACS, GridSpec.torus((16, 1, 1, 1)), amplitude=0.05)
    report = fit_heat_subsolution([state, step(state, StepperConfig())])
    assert report.pairs == 1
    assert np.isfinite(report.C1) and report.C1 >= 0.0
    assert np.isfinite(report.C2) and report.C2 >= 0.0
    print(f"   [PASS] C1 = {report.C1:.3e}, C2 = {report.C2:.3e}")


def _winding_g2_state(size: int, amplitude: float = 0.3) -> FlowState:
    """phi = exp((x + a sin x) M) . phi0; the torsion never vanishes for a < 1."""
    grid = GridSpec.torus((size,) + (1,) * 6)
    model = model_for(FlowKind.G2)
    x = np.broadcast_to(grid.coordinate(0), grid.sizes)
    s = x + amplitude * np.sin(x)
    rotations = expm(s[..., None, None] * g2_direction_generator(0))
    values = model.act(model_values(FlowKind.G2, grid), rotations)
    return FlowState(kind=FlowKind.G2, structure=model.unpack(values, grid))


def _states_until(state: FlowState, t_end: float) -> List[FlowState]:
    cfg = StepperConfig()
    states = [state]
    while states[-1].t < t_end - 1e-12:
        states.append(step(states[-1], cfg))
    return states


def test_heat_fit_refinement():
    """Fitted constants of a G2 run do not grow by more than 2x under (h, dt) -> (h/2, dt/4)."""
    print("\n[TEST] Heat Fit under Refinement...")
    coarse = fit_heat_subsolution(_states_until(_winding_g2_state(32), 0.1))
    fine = fit_heat_subsolution(_states_until(_winding_g2_state(64), 0.1))
    assert fine.pairs > 3 * coarse.pairs
    assert coarse.skipped_eps == 0 and fine.skipped_eps == 0
    for report in (coarse, fine):
        assert np.isfinite(report.C1) and np.isfinite(report.C2)
    assert fine.C1 <= 2.0 * coarse.C1 + 1e-8
    print(f"   [PASS] C1 = {coarse.C1:.3e} -> {fine.C1:.3e}, C2 = {coarse.C2:.3e} -> {fine.C2:.3e}")


def main():
    """Run all tests."""
    print("=" * 60)
    print("Diagnostics - Test Suite")
    print("=" * 60)

    tests = [
        ("Mode Energy", test_mode_energy),
        ("Diagnostics Record", test_record_for),
        ("Energy Identity on an Exact Series", test_energy_identity_exact_series),
        ("Energy Identity on a Stationary Series", test_energy_identity_stationary),
        ("Energy Identity Mismatch", test_energy_identity_mismatch),
        ("Short Series", test_energy_identity_too_short),
        ("Uniform Prefix", test_uniform_prefix),
        ("Energy Identity Tolerance", test_energy_identity_tolerance),
        ("Blow-up Fit", test_blowup_fit_exact_rate),
        ("Decaying Density", test_blowup_fit_decaying),
        ("Blow-up Fit from Records", test_blowup_fit_from_records),
        ("Blow-up Bound on a G2 Run", test_blowup_bound_on_g2_run),
        ("Energy Monotonicity", test_monotonicity),
        ("Heat Kernel Mass", test_heat_kernel_mass),
        ("Heat Kernel Lattice Sum", test_heat_kernel_lattice_sum),
        ("Entropy Functional", test_entropy_functional),
        ("Entropy of a Gaussian Bump", test_entropy_gaussian_bump),
        ("Heat Fit on Fixed Points", test_heat_fit_constant_states),
        ("Heat Fit on a Step Pair", test_heat_fit_step_pair),
        ("Heat Fit under Refinement", test_heat_fit_refinement),
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
        print("\n[SUCCESS] All diagnostics tests passed")
        return 0
    print(f"\n[WARNING] {len(results) - passed_count} test(s) failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())
