"""
Node implementations of the run pipeline.

This module contains the node functions that process the run state:
- Load Config: reads and validates the run configuration
- Simulate: builds the initial condition, drives run_flow, writes snapshots
- Check: runs the enabled diagnostics checks on the sampled series
- Write Outputs: writes the JSON-lines stream and the CSV summary
- Report Error: maps failures to exit codes

It also holds the readers and writers of the diagnostics files shared with
the `check` command. Config errors map to exit code 2, flow errors to 1.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from infrastructure.config import get_config
from infrastructure.errors import ConfigError, FlowError, HarmonicFlowError, TooShortSeries
from infrastructure.run_config import RunConfig, load_run_config
from infrastructure.snapshots import write_snapshot
from flows.diagnostics import (
    HeatFitReport,
    check_energy_identity,
    check_energy_monotonicity,
    check_records_blowup_bound,
    fit_heat_subsolution,
    uniform_prefix,
)
from flows.initial import build_initial_state
from flows.retraction import unlift_contact
from flows.state import (
    DiagnosticsRecord,
    FlowKind,
    FlowState,
    RunHeader,
    RunOutcome,
    RunState,
    Scheme,
    StepperConfig,
)
from flows.stepper import resolve_timestep, run_flow


CSV_COLUMNS = ["t", "E", "K", "eps_max", "drift"]
SERIES_FILE = "diagnostics.jsonl"
SUMMARY_FILE = "summary.csv"
SNAPSHOT_DIR = "snapshots"


def _get(state: RunState, key: str) -> Any:
    return getattr(state, key) if isinstance(state, RunState) else state[key]


def _info(state: RunState, message: str) -> None:
    if not _get(state, "quiet"):
        print(f"[INFO] {message}")


# ==================== Files ====================

def write_series(path: Path, records: Sequence[DiagnosticsRecord], reports: Sequence[Dict[str, Any]] = (),
                 outcome: Optional[Dict[str, Any]] = None, header: Optional[RunHeader] = None) -> Path:
    """
    Write the JSON-lines diagnostics stream.

    The {"run": ...} header line (when known), one DiagnosticsRecord object
    per line, then one {"report": ...} line per report and finally the
    {"outcome": ...} line.
    """
    lines = [json.dumps(header.as_line())] if header is not None else []
    lines += [json.dumps(r.model_dump()) for r in records]
    lines += [json.dumps(report) for report in reports]
    if outcome is not None:
        lines.append(json.dumps(outcome))
    path.write_text("".join(line + "\n" for line in lines))
    return path


def _stream_objects(path: Path) -> List[Tuple[int, Dict[str, Any]]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"diagnostics file not found: {path}")
    objects = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as e:
            raise ConfigError(f"{path}:{number}: malformed diagnostics line: {e}") from e
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}:{number}: malformed diagnostics line: expected a JSON object")
        objects.append((number, obj))
    return objects


def read_series(path: Path) -> List[DiagnosticsRecord]:
    """
    Read the records of a JSON-lines diagnostics stream, skipping header, report and outcome lines.

    Raises:
        ConfigError: if the file is missing or a line is malformed
    """
    records = []
    for number, obj in _stream_objects(path):
        if "run" in obj or "report" in obj or "outcome" in obj:
            continue
        try:
            records.append(DiagnosticsRecord(**obj))
        except ValueError as e:
            raise ConfigError(f"{path}:{number}: malformed diagnostics line: {e}") from e
    return records


def read_header(path: Path) -> Optional[RunHeader]:
    """The {"run": ...} line of a stream, or None for streams written without one."""
    for number, obj in _stream_objects(path):
        if "run" in obj:
            try:
                return RunHeader(**obj["run"])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{path}:{number}: malformed run header: {e}") from e
    return None


def write_summary(path: Path, records: Sequence[DiagnosticsRecord]) -> Path:
    """CSV summary with header t,E,K,eps_max,drift and full-precision floats."""
    frame = pd.DataFrame(
        [[r.t, r.E, r.K, r.eps_max, r.constraint_drift] for r in records],
        columns=CSV_COLUMNS,
    )
    frame.to_csv(path, index=False)
    return path


def structure_arrays(state: FlowState) -> Dict[str, Any]:
    """Named arrays of a structure field for snapshots."""
    structure = state.structure
    if state.is_homogeneous:
        return {"A": structure.A}
    if state.kind == FlowKind.ACTS:
        return {"xi": structure.xi, "theta": structure.theta}
    name = {FlowKind.PARALLELISM: "frames", FlowKind.ACS: "J", FlowKind.G2: "phi"}[state.kind]
    return {name: structure.values}


def snapshot(directory: Path, state: FlowState) -> Path:
    return write_snapshot(directory, f"snapshot_{state.step:06d}", state.grid, state.kind.value,
                          state.t, state.step, structure_arrays(state))


def stepper_config(run_config: RunConfig) -> StepperConfig:
    section = run_config.stepper
    options: Dict[str, Any] = {
        "dt": section.dt,
        "scheme": Scheme(section.scheme),
        "max_steps": section.max_steps,
        "stop_tolerance": section.stop_tolerance,
        "enforce_cfl": section.enforce_cfl,
        "sample_interval": run_config.outputs.sample_interval,
    }
    if section.cfl is not None:
        options["cfl"] = section.cfl
    return StepperConfig(**options)


def merge_heat_reports(reports: Sequence[HeatFitReport]) -> Optional[HeatFitReport]:
    if not reports:
        return None
    return HeatFitReport(
        C1=max(r.C1 for r in reports),
        C2=max(r.C2 for r in reports),
        pairs=sum(r.pairs for r in reports),
        points=sum(r.points for r in reports),
        skipped_eps=sum(r.skipped_eps for r in reports),
        skipped_kappa=sum(r.skipped_kappa for r in reports),
    )


# ==================== Nodes ====================

def load_config_node(state: RunState) -> Dict[str, Any]:
    """
    Node 1: Load Config

    Reads the run configuration and resolves the output directory.
    """
    path = _get(state, "config_path")
    try:
        run_config = load_run_config(path, _get(state, "seed_override"))
    except ConfigError as e:
        return {"error": str(e), "exit_code": 2, "outcome": RunOutcome.ERROR.value}

    out_dir = _get(state, "out_dir") or run_config.outputs.directory or str(get_config().output_dir)
    _info(state, f"Loaded {run_config.kind} run ({run_config.geometry}) from {path}")
    return {"run_config": run_config, "out_dir": out_dir}


def simulate_node(state: RunState) -> Dict[str, Any]:
    """
    Node 2: Simulate

    Builds the initial condition and runs the flow. Snapshots are written every
    snapshot_interval steps and for the final state; the heat sub-solution fit
    is accumulated over the sampled step pairs.
    """
    run_config: RunConfig = _get(state, "run_config")
    out_dir = Path(_get(state, "out_dir"))
    snapshot_dir = out_dir / SNAPSHOT_DIR
    diagnostics = run_config.diagnostics
    try:
        initial = build_initial_state(run_config)
        cfg = stepper_config(run_config)
        dt = resolve_timestep(initial, cfg)
        _info(state, f"Initial condition '{run_config.initial.generator}', dt = {dt:.6g}, "
                     f"{cfg.scheme.value}, max_steps = {cfg.max_steps}")

        heat_reports: List[HeatFitReport] = []
        previous = {"state": initial}
        snapshot_interval = run_config.outputs.snapshot_interval

        def observer(current: FlowState) -> None:
            if diagnostics.heat_fit and current.step % cfg.sample_interval == 0:
                heat_reports.append(fit_heat_subsolution([previous["state"], current]))
            previous["state"] = current
            if snapshot_interval and current.step % snapshot_interval == 0:
                snapshot(snapshot_dir, current)

        result = run_flow(
            initial,
            cfg,
            observer=observer,
            harmonic_residual=diagnostics.harmonic_residual,
            entropy_horizon=diagnostics.entropy_horizon if diagnostics.entropy else None,
            entropy_center=diagnostics.entropy_center,
        )
    except FlowError as e:
        print(f"[ERROR] Flow failed: {type(e).__name__}: {e}")
        return {"error": f"{type(e).__name__}: {e}", "exit_code": 1, "outcome": RunOutcome.ERROR.value}
    except HarmonicFlowError as e:
        print(f"[ERROR] Could not start the run: {type(e).__name__}: {e}")
        return {"error": f"{type(e).__name__}: {e}", "exit_code": 1, "outcome": RunOutcome.ERROR.value}

    snapshot(snapshot_dir, result.final_state)
    reports = list(_get(state, "reports"))
    merged = merge_heat_reports(heat_reports)
    if merged is not None:
        reports.append(merged.as_line())
    _info(state, f"Run finished after {result.steps} steps: {result.message}")
    return {
        "records": result.records,
        "outcome": result.outcome.value,
        "steps": result.steps,
        "dt": dt,
        "header": result.header,
        "message": result.message,
        "reports": reports,
    }


def check_node(state: RunState) -> Dict[str, Any]:
    """
    Node 3: Check

    Runs the enabled series checks. Checks are report-only here; `check`
    on the written stream gives the pass/fail exit code.
    """
    run_config: RunConfig = _get(state, "run_config")
    records = list(_get(state, "records"))
    reports = list(_get(state, "reports"))

    if run_config.diagnostics.energy_identity:
        try:
            header = _get(state, "header")
            if header is None:
                report = check_energy_identity(records)
            else:
                report = check_energy_identity(records, h=header.h, dt=header.dt)
            reports.append(report.as_line())
            _info(state, f"Energy identity: max relative error {report.max_rel_error:.3e}, "
                         f"tolerance {report.tolerance:.3e} "
                         f"({'pass' if report.passed else 'FAIL'})")
        except TooShortSeries as e:
            if not _get(state, "quiet"):
                print(f"[WARNING] Energy identity skipped: {e}")
    if run_config.diagnostics.blowup_fit and records:
        report = check_records_blowup_bound(records)
        reports.append(report.as_line())
        _info(state, f"Blow-up bound: C = {report.C:.4g}, delta = {report.delta_hat:.4g} "
                     f"({'pass' if report.passed else 'FAIL'})")
    if len(uniform_prefix(records)) >= 2:
        report = check_energy_monotonicity(records)
        reports.append(report.as_line())
    return {"reports": reports}


def write_outputs_node(state: RunState) -> Dict[str, Any]:
    """
    Node 4: Write Outputs

    Writes diagnostics.jsonl and summary.csv and prints the outcome line.
    """
    out_dir = Path(_get(state, "out_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    records = list(_get(state, "records"))
    outcome = {
        "outcome": _get(state, "outcome") or RunOutcome.ERROR.value,
        "steps": _get(state, "steps"),
        "message": _get(state, "error") or _get(state, "message"),
    }
    series_path = write_series(out_dir / SERIES_FILE, records, _get(state, "reports"), outcome,
                               _get(state, "header"))
    summary_path = write_summary(out_dir / SUMMARY_FILE, records)
    _info(state, f"Wrote {len(records)} records to {series_path}")
    print(f"[RESULT] outcome={outcome['outcome']}")
    if not _get(state, "error") and not _get(state, "quiet"):
        print("[SUCCESS] Run complete")
    return {"output_files": [str(series_path), str(summary_path)]}


def report_error_node(state: RunState) -> Dict[str, Any]:
    """
    Node 5: Report Error

    Prints the failure; config failures end the run here with the outcome line.
    """
    error = _get(state, "error")
    print(f"[ERROR] {error}")
    if _get(state, "run_config") is None:
        print(f"[RESULT] outcome={RunOutcome.ERROR.value}")
    return {"outcome": RunOutcome.ERROR.value}


def check_series(path: Path) -> Tuple[List[Dict[str, Any]], bool]:
    """
    Run the energy identity and blow-up bound checks on a diagnostics file.

    The identity tolerance is C_id (h^2 + dt) with h and dt from the run
    header; streams without a header use h = 0 and the sample spacing.

    Returns:
        (report lines, all passed)

    Raises:
        ConfigError: malformed file
        TooShortSeries: fewer than 3 usable samples
    """
    records = read_series(path)
    header = read_header(path)
    if header is None:
        identity = check_energy_identity(records)
    else:
        identity = check_energy_identity(records, h=header.h, dt=header.dt)
    bound = check_records_blowup_bound(records)
    return [identity.as_line(), bound.as_line()], identity.passed and bound.passed
