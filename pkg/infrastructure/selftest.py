"""
Randomized identity suite behind `selftest`.

This module provides:
- The G2 identities the flows rely on, each checked on random samples
- Rank checks of the Lambda^2 and Lambda^3 splittings by eigen-decomposition
- Exterior algebra sanity checks (Hodge involution, graded commutativity)
- A pass/fail table printed with tabulate

The seed comes from the configuration. --flip-phi-sign builds the suite on
-phi0, which the identity checks must reject.
"""

from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from tabulate import tabulate

from infrastructure.config import get_config
from infrastructure.exterior import (
    AltForm,
    SkewMatrix,
    Vector,
    contract_forms,
    form_inner,
    hodge,
    interior,
    random_form,
    so_action,
    tensor_inner,
    wedge,
)
from infrastructure.g2 import (
    DIM,
    EXPECTED_CONSTANTS,
    G2Constants,
    build_g2_constants,
    lambda2_operator_matrix,
    lambda3_projector_matrices,
)


class SelftestRow(BaseModel):
    """One line of the identity table."""

    name: str
    expected: float
    measured: float = Field(description="Measured constant (worst sample)")
    max_error: float = Field(ge=0.0, description="Worst relative error over the samples")
    samples: int = Field(ge=1)
    passed: bool


def _row(name: str, expected: float, measured: np.ndarray, errors: np.ndarray, tol: float) -> SelftestRow:
    worst = int(np.argmax(errors))
    max_error = float(errors[worst])
    return SelftestRow(name=name, expected=expected, measured=float(measured.ravel()[worst]),
                       max_error=max_error, samples=errors.size, passed=max_error <= tol)


def _rel(diff: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.max(np.abs(diff), axis=-1) / np.maximum(1.0, np.max(np.abs(scale), axis=-1))


def _ratio(a: AltForm, b: AltForm) -> np.ndarray:
    return np.atleast_1d(form_inner(a, b) / form_inner(b, b))


def check_eq3(c: G2Constants, x: Vector, tol: float) -> SelftestRow:
    """((beta.phi) ⌟ psi) ⌟ phi = 72 beta for beta = X ⌟ phi in Lambda^2_7."""
    beta = interior(x, c.phi0)
    gamma = so_action(SkewMatrix.from_two_form(beta), c.phi0)
    lhs = interior(Vector(dim=DIM, components=contract_forms(gamma, c.psi0).coeffs), c.phi0)
    expected = 72.0 * beta.coeffs
    return _row("eq3: ((beta.phi) ⌟ psi) ⌟ phi = 72 beta", 72.0, _ratio(lhs, beta),
                _rel(lhs.coeffs - expected, expected), tol)


def check_psi_contraction(c: G2Constants, x: Vector, tol: float) -> SelftestRow:
    """(X ⌟ psi) ⌟ psi = -24 X."""
    out = contract_forms(interior(x, c.psi0), c.psi0).coeffs
    expected = -24.0 * x.components
    measured = np.sum(out * x.components, axis=-1) / np.sum(x.components ** 2, axis=-1)
    return _row("(X ⌟ psi) ⌟ psi = -24 X", -24.0, measured, _rel(out - expected, expected), tol)


def check_phi_interior_norm(c: G2Constants, x: Vector, tol: float) -> SelftestRow:
    """<X ⌟ phi, X ⌟ phi> = 6 |X|^2 for the tensor inner product."""
    beta = interior(x, c.phi0)
    norm_sq = np.sum(x.components ** 2, axis=-1)
    measured = np.atleast_1d(tensor_inner(beta, beta)) / norm_sq
    errors = np.abs(measured - 6.0) / np.maximum(1.0, 6.0)
    return _row("<X ⌟ phi, X ⌟ phi> = 6 |X|^2", 6.0, measured, errors, tol)


def check_beta_action(c: G2Constants, x: Vector, tol: float) -> SelftestRow:
    """(X ⌟ phi).phi = -3 X ⌟ psi."""
    beta = interior(x, c.phi0)
    gamma = so_action(SkewMatrix.from_two_form(beta), c.phi0)
    target = interior(x, c.psi0)
    expected = -3.0 * target.coeffs
    return _row("(X ⌟ phi).phi = -3 X ⌟ psi", -3.0, _ratio(gamma, target),
                _rel(gamma.coeffs - expected, expected), tol)


def check_volume(c: G2Constants, tol: float) -> SelftestRow:
    measured = np.atleast_1d(wedge(c.phi0, c.psi0).coeffs[0])
    return _row("phi ∧ psi = 7 vol", 7.0, measured, np.abs(measured - 7.0) / 7.0, tol)


def _rank_row(name: str, expected: Tuple[int, ...], measured: Tuple[int, ...]) -> SelftestRow:
    errors = np.array([abs(a - b) for a, b in zip(expected, measured)], dtype=float)
    label = "/".join(str(m) for m in measured)
    return SelftestRow(name=f"{name} ({label})", expected=float(sum(expected)), measured=float(sum(measured)),
                       max_error=float(np.max(errors)), samples=len(expected), passed=not np.any(errors))


def check_lambda2_ranks(c: G2Constants) -> SelftestRow:
    """*(phi ∧ .) has eigenvalue +2 with multiplicity 7 and -1 with multiplicity 14."""
    eig = np.linalg.eigvalsh(lambda2_operator_matrix(c))
    ranks = (int(np.sum(np.abs(eig - 2.0) < 1e-9)), int(np.sum(np.abs(eig + 1.0) < 1e-9)))
    return _rank_row("Lambda^2 = 7 + 14", (7, 14), ranks)


def check_lambda3_ranks(c: G2Constants) -> SelftestRow:
    """Projector ranks 1/7/27, each idempotent, summing to the identity."""
    projectors = lambda3_projector_matrices(c)
    ranks = []
    for p in projectors:
        eig = np.linalg.eigvals(p)
        idempotent = np.allclose(p @ p, p, atol=1e-10)
        ranks.append(int(np.sum(np.abs(eig - 1.0) < 1e-9)) if idempotent else -1)
    complete = np.allclose(sum(projectors), np.eye(35), atol=1e-10)
    return _rank_row("Lambda^3 = 1 + 7 + 27", (1, 7, 27), tuple(ranks) if complete else (-1, -1, -1))


def check_hodge_involution(rng: np.random.Generator, samples: int, tol: float) -> SelftestRow:
    """** = 1 on forms of R^7."""
    errors, measured = [], []
    for k in range(DIM + 1):
        a = random_form(rng, DIM, k, batch=(samples,))
        back = hodge(hodge(a))
        errors.append(_rel(back.coeffs - a.coeffs, a.coeffs))
        measured.append(_ratio(back, a))
    return _row("** = 1 on R^7", 1.0, np.concatenate(measured), np.concatenate(errors), tol)


def check_graded_commutativity(rng: np.random.Generator, samples: int, tol: float) -> SelftestRow:
    """a ∧ b = (-1)^(kl) b ∧ a on R^8."""
    errors, measured = [], []
    for k, l in ((1, 2), (2, 3), (3, 3), (2, 2)):
        a = random_form(rng, 8, k, batch=(samples,))
        b = random_form(rng, 8, l, batch=(samples,))
        ab = wedge(a, b)
        ba = wedge(b, a) * float((-1) ** (k * l))
        errors.append(_rel(ab.coeffs - ba.coeffs, ab.coeffs))
        measured.append(np.ones(samples))
    return _row("a ∧ b = (-1)^kl b ∧ a", 1.0, np.concatenate(measured), np.concatenate(errors), tol)


def run_selftest(seed: Optional[int] = None, samples: Optional[int] = None,
                 flip_phi_sign: bool = False) -> List[SelftestRow]:
    """
    Run the identity suite.

    Args:
        seed: RNG seed (defaults to the configured selftest_seed)
        samples: Random samples per identity (defaults to selftest_samples)
        flip_phi_sign: Build the suite on -phi0 (mutation hook)

    Returns:
        One SelftestRow per identity
    """
    settings = get_config()
    seed = settings.selftest_seed if seed is None else seed
    samples = settings.selftest_samples if samples is None else samples
    tol = settings.identity_tol
    rng = np.random.Generator(np.random.Philox(seed))

    constants = build_g2_constants(-1 if flip_phi_sign else 1)
    x = Vector(dim=DIM, components=rng.standard_normal((samples, DIM)))

    checks: List[Callable[[], SelftestRow]] = [
        lambda: check_eq3(constants, x, tol),
        lambda: check_psi_contraction(constants, x, tol),
        lambda: check_phi_interior_norm(constants, x, tol),
        lambda: check_beta_action(constants, x, tol),
        lambda: check_volume(constants, tol),
        lambda: check_lambda2_ranks(constants),
        lambda: check_lambda3_ranks(constants),
        lambda: check_hodge_involution(rng, samples, tol),
        lambda: check_graded_commutativity(rng, samples, tol),
    ]
    return [check() for check in checks]


def format_table(rows: List[SelftestRow]) -> str:
    return tabulate(
        [[r.name, r.expected, f"{r.measured:.12g}", f"{r.max_error:.2e}", r.samples,
          "PASS" if r.passed else "FAIL"] for r in rows],
        headers=["identity", "expected", "measured", "max rel error", "samples", "status"],
        tablefmt="github",
    )


def cmd_selftest(flip_phi_sign: bool = False, quiet: bool = False) -> int:
    """
    Run the suite, print the table and return the exit code (0 iff every row passes).
    """
    if not quiet:
        print("[INFO] Running the identity suite...")
    rows = run_selftest(flip_phi_sign=flip_phi_sign)
    print(format_table(rows))
    failed = [r.name for r in rows if not r.passed]
    if failed:
        print(f"[ERROR] {len(failed)} identities failed: {', '.join(failed)}")
        return 1
    if not quiet:
        print(f"[SUCCESS] All {len(rows)} identities passed ({', '.join(f'{k} = {v:g}' for k, v in EXPECTED_CONSTANTS.items())})")
    return 0
