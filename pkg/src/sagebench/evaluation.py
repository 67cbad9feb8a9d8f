"""Error evaluation and experiment orchestration.

Matches estimated paths against ground truth with a delay gate and a
closest-elevation rule, sweeps scenarios against antenna-subset schemes with
rotation averaging and Monte Carlo seeds, and exports the per-cell error
statistics as CSV or a self-contained structured-text report that can be
re-run verbatim.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .array_geometry import (
    ArrayGeometry,
    ColumnScheme,
    ExplicitScheme,
    RowScheme,
    Scheme,
    enumerate_rotations,
    full_selection,
    select_subarray,
)
from .channel import (
    DEFAULT_DELAY_GATE_S,
    FrequencyGrid,
    PathLabel,
    PathParams,
    ScenarioSpec,
    apply_los_dominance,
    default_grid,
    ground_truth_from_scenario,
    restrict_channel,
    synthesize_channel,
)
from .sage import SageConfig, run_sage

CSV_COLUMNS = (
    "scenario_id",
    "n_antennas",
    "scheme",
    "mean_az_err_deg",
    "mean_el_err_deg",
    "mean_delay_err_ns",
    "match_rate",
    "n_runs",
)

REPORT_KIND = "sagebench-experiment-report"

DEFAULT_LOS_EXCESS_DB = 10.0


# --------------------------------------------------------------------------
# Path matching


@dataclass(frozen=True)
class MatchEntry:
    truth: PathParams
    matched: PathParams | None
    azimuth_error_deg: float | None
    elevation_error_deg: float | None
    delay_error_ns: float | None


@dataclass(frozen=True)
class MatchReport:
    entries: tuple[MatchEntry, ...]
    unmatched_truth_count: int
    spurious_estimate_count: int

    @property
    def matched_count(self) -> int:
        return sum(1 for e in self.entries if e.matched is not None)


def _wrapped_angle_deg(a: float, b: float) -> float:
    d = math.degrees(a - b)
    return (d + 180.0) % 360.0 - 180.0


def match_paths(
    estimates: list[PathParams],
    truth: list[PathParams],
    delay_gate: float = DEFAULT_DELAY_GATE_S,
) -> MatchReport:
    """Greedy truth-to-estimate assignment.

    Truth paths are processed in ascending delay order; each takes the
    still-unassigned estimate with the closest elevation among those whose
    delay differs by less than the gate (ties: smaller delay difference,
    then smaller estimate index). Errors are signed, estimate minus truth.
    """
    if delay_gate <= 0:
        raise ValueError("delay_gate must be > 0")
    order = sorted(range(len(truth)), key=lambda i: truth[i].delay)
    assigned: set[int] = set()
    entries: list[MatchEntry] = []
    for ti in order:
        t = truth[ti]
        candidates = [
            (abs(e.elevation - t.elevation), abs(e.delay - t.delay), ei)
            for ei, e in enumerate(estimates)
            if ei not in assigned and abs(e.delay - t.delay) < delay_gate
        ]
        if candidates:
            _, _, ei = min(candidates)
            assigned.add(ei)
            e = estimates[ei]
            entries.append(
                MatchEntry(
                    truth=t,
                    matched=e,
                    azimuth_error_deg=_wrapped_angle_deg(e.azimuth, t.azimuth),
                    elevation_error_deg=math.degrees(e.elevation - t.elevation),
                    delay_error_ns=(e.delay - t.delay) * 1e9,
                )
            )
        else:
            entries.append(MatchEntry(t, None, None, None, None))
    return MatchReport(
        entries=tuple(entries),
        unmatched_truth_count=len(truth) - len(assigned),
        spurious_estimate_count=len(estimates) - len(assigned),
    )


def pooled_errors(
    reports: list[MatchReport], exclude_labels: set[PathLabel] | None = None
) -> dict:
    """Absolute matched-path errors pooled across runs.

    Means use compensated summation so aggregation order cannot change the
    result. Truth paths with labels in ``exclude_labels`` are ignored for
    both the means and the match rate.
    """
    exclude = exclude_labels or set()
    az: list[float] = []
    el: list[float] = []
    dl: list[float] = []
    n_truth = 0
    for rep in reports:
        for entry in rep.entries:
            if entry.truth.label in exclude:
                continue
            n_truth += 1
            if entry.matched is None:
                continue
            az.append(abs(entry.azimuth_error_deg))
            el.append(abs(entry.elevation_error_deg))
            dl.append(abs(entry.delay_error_ns))
    n_matched = len(az)
    return {
        "mean_az_err_deg": math.fsum(az) / n_matched if n_matched else math.nan,
        "mean_el_err_deg": math.fsum(el) / n_matched if n_matched else math.nan,
        "mean_delay_err_ns": math.fsum(dl) / n_matched if n_matched else math.nan,
        "match_rate": n_matched / n_truth if n_truth else math.nan,
        "n_matched": n_matched,
        "n_truth": n_truth,
    }


# --------------------------------------------------------------------------
# Sweep cells


@dataclass(frozen=True)
class CellStats:
    scenario_id: str
    n_antennas: int
    scheme: str
    mean_az_err_deg: float
    mean_el_err_deg: float
    mean_delay_err_ns: float
    match_rate: float
    n_runs: int
    failed: bool = False
    error: str | None = None
    reports: tuple[MatchReport, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "n_antennas": self.n_antennas,
            "scheme": self.scheme,
            "mean_az_err_deg": self.mean_az_err_deg,
            "mean_el_err_deg": self.mean_el_err_deg,
            "mean_delay_err_ns": self.mean_delay_err_ns,
            "match_rate": self.match_rate,
            "n_runs": self.n_runs,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellStats":
        return cls(**d)


def parse_scheme(text: str) -> Scheme:
    """Parse 'columns:N' or 'rows:K[:OFFSET]' scheme descriptors."""
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "columns" and len(parts) == 2:
            return ColumnScheme(int(parts[1]))
        if kind == "rows" and len(parts) in (2, 3):
            offset = int(parts[2]) if len(parts) == 3 else 0
            return RowScheme(int(parts[1]), offset)
    except ValueError:
        pass
    raise ValueError(f"cannot parse scheme {text!r}")


def scheme_n_antennas(geom: ArrayGeometry, scheme: Scheme) -> int:
    if isinstance(scheme, ColumnScheme):
        return scheme.n_cols * geom.n_rows
    if isinstance(scheme, RowScheme):
        return scheme.n_rows * geom.n_columns
    if isinstance(scheme, ExplicitScheme):
        return len(scheme.indices)
    raise TypeError(f"unsupported scheme {scheme!r}")


def resolve_n_paths(scenario: ScenarioSpec) -> int:
    return len(scenario.reflectors) + (0 if scenario.los_blocked else 1)


def run_cell(
    scenario: ScenarioSpec,
    geom: ArrayGeometry,
    scheme: Scheme,
    cfg: SageConfig,
    seeds: list[int],
    grid: FrequencyGrid | None = None,
    los_excess_db: float | None = DEFAULT_LOS_EXCESS_DB,
    delay_gate: float = DEFAULT_DELAY_GATE_S,
) -> CellStats:
    """One (scenario, scheme) cell of the sweep.

    Per seed the channel is synthesized once on the full array (the seed
    drives both path phases and noise), then every rotation offset of the
    scheme is estimated on its restricted snapshot and matched against
    truth. Column schemes enumerate all rotation offsets; other schemes run
    a single selection. Estimation failures carry (seed, rotation) context.
    """
    grid = grid or default_grid()
    if isinstance(scheme, ColumnScheme):
        selections = enumerate_rotations(geom, scheme.n_cols)
    else:
        selections = [select_subarray(geom, scheme)]
    full = full_selection(geom)
    cfg_l = cfg if cfg.n_paths is not None else cfg.resolve_paths(resolve_n_paths(scenario))

    reports: list[MatchReport] = []
    for seed in seeds:
        spec_s = scenario.reseeded(seed)
        truth = ground_truth_from_scenario(spec_s, geom.carrier_frequency)
        if not spec_s.los_blocked and los_excess_db is not None:
            truth = apply_los_dominance(truth, los_excess_db)
        full_data = synthesize_channel(geom, full, truth, grid, spec_s.snr_db, seed)
        for rotation, sel in enumerate(selections):
            try:
                sub = restrict_channel(full_data, sel)
                result = run_sage(sub, geom, cfg_l)
                reports.append(match_paths(list(result.paths), truth, delay_gate))
            except Exception as exc:
                raise RuntimeError(
                    f"cell {scenario.name}/{scheme.describe()} failed at "
                    f"seed={seed} rotation={rotation}: {exc}"
                ) from exc

    stats = pooled_errors(reports)
    return CellStats(
        scenario_id=scenario.name,
        n_antennas=scheme_n_antennas(geom, scheme),
        scheme=scheme.describe(),
        mean_az_err_deg=stats["mean_az_err_deg"],
        mean_el_err_deg=stats["mean_el_err_deg"],
        mean_delay_err_ns=stats["mean_delay_err_ns"],
        match_rate=stats["match_rate"],
        n_runs=len(seeds) * len(selections),
        reports=tuple(reports),
    )


# --------------------------------------------------------------------------
# Experiment sweep


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[CellStats, ...]
    config: dict

    def cell(self, scenario_id: str, scheme: str) -> CellStats:
        for c in self.cells:
            if c.scenario_id == scenario_id and c.scheme == scheme:
                return c
        raise LookupError(f"no cell ({scenario_id!r}, {scheme!r})")

    @property
    def any_failed(self) -> bool:
        return any(c.failed for c in self.cells)


def _experiment_config(
    scenarios: list[ScenarioSpec],
    geom: ArrayGeometry,
    cfg: SageConfig,
    schemes: list[Scheme],
    seeds: list[int],
    grid: FrequencyGrid,
    los_excess_db: float | None,
    delay_gate: float,
) -> dict:
    return {
        "scenarios": [s.to_dict() for s in scenarios],
        "array": geom.to_dict(),
        "sage": cfg.to_dict(),
        "schemes": [s.describe() for s in schemes],
        "seeds": list(seeds),
        "grid": {"start": grid.start, "stop": grid.stop, "n_points": grid.n_points},
        "los_excess_db": los_excess_db,
        "delay_gate": delay_gate,
    }


def run_experiment(
    scenarios: list[ScenarioSpec],
    geom: ArrayGeometry,
    cfg: SageConfig,
    schemes: list[Scheme],
    seeds: list[int],
    grid: FrequencyGrid | None = None,
    los_excess_db: float | None = DEFAULT_LOS_EXCESS_DB,
    delay_gate: float = DEFAULT_DELAY_GATE_S,
) -> ExperimentReport:
    """Cartesian scenarios x schemes sweep.

    A failing cell is recorded (failed=True plus the error message) without
    aborting the remaining cells.
    """
    if not scenarios or not schemes:
        raise ValueError("scenarios and schemes must be non-empty")
    grid = grid or default_grid()
    cells: list[CellStats] = []
    for scenario in scenarios:
        for scheme in schemes:
            try:
                cells.append(
                    run_cell(
                        scenario, geom, scheme, cfg, seeds,
                        grid=grid, los_excess_db=los_excess_db, delay_gate=delay_gate,
                    )
                )
            except Exception as exc:
                cells.append(
                    CellStats(
                        scenario_id=scenario.name,
                        n_antennas=scheme_n_antennas(geom, scheme),
                        scheme=scheme.describe(),
                        mean_az_err_deg=math.nan,
                        mean_el_err_deg=math.nan,
                        mean_delay_err_ns=math.nan,
                        match_rate=math.nan,
                        n_runs=0,
                        failed=True,
                        error=str(exc),
                    )
                )
    config = _experiment_config(
        scenarios, geom, cfg, schemes, seeds, grid, los_excess_db, delay_gate
    )
    return ExperimentReport(cells=tuple(cells), config=config)


# --------------------------------------------------------------------------
# Export / import


def export_report_csv(report: ExperimentReport, path: str | Path) -> None:
    """One data row per cell, fixed column order (see CSV_COLUMNS)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for c in report.cells:
            writer.writerow(
                [
                    c.scenario_id,
                    c.n_antennas,
                    c.scheme,
                    repr(c.mean_az_err_deg),
                    repr(c.mean_el_err_deg),
                    repr(c.mean_delay_err_ns),
                    repr(c.match_rate),
                    c.n_runs,
                ]
            )


def export_report_text(report: ExperimentReport, path: str | Path) -> None:
    """Structured-text report embedding the full configuration and seeds."""
    doc = {
        "kind": REPORT_KIND,
        "config": report.config,
        "cells": [c.to_dict() for c in report.cells],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def export_report(report: ExperimentReport, path: str | Path, format: str) -> None:
    if format == "csv":
        export_report_csv(report, path)
    elif format == "structured_text":
        export_report_text(report, path)
    else:
        raise ValueError(f"unknown report format {format!r}")


def import_report(path: str | Path) -> ExperimentReport:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if doc.get("kind") != REPORT_KIND:
        raise ValueError(f"{path} is not an experiment report")
    cells = tuple(CellStats.from_dict(d) for d in doc["cells"])
    return ExperimentReport(cells=cells, config=doc["config"])


def rerun_from_report(path: str | Path) -> ExperimentReport:
    """Re-run the sweep embedded in an exported structured-text report."""
    config = import_report(path).config
    return run_experiment(
        scenarios=[ScenarioSpec.from_dict(d) for d in config["scenarios"]],
        geom=ArrayGeometry.from_dict(config["array"]),
        cfg=SageConfig.from_dict(config["sage"]),
        schemes=[parse_scheme(s) for s in config["schemes"]],
        seeds=list(config["seeds"]),
        grid=FrequencyGrid(**config["grid"]),
        los_excess_db=config["los_excess_db"],
        delay_gate=config["delay_gate"],
    )


def write_error_plot(report: ExperimentReport, path: str | Path) -> None:
    """Static vector plot of mean angle errors versus antenna count."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_az, ax_el) = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    scenario_ids = list(dict.fromkeys(c.scenario_id for c in report.cells))
    for sid in scenario_ids:
        cells = sorted(
            (c for c in report.cells if c.scenario_id == sid and not c.failed),
            key=lambda c: c.n_antennas,
        )
        if not cells:
            continue
        n = [c.n_antennas for c in cells]
        ax_az.plot(n, [c.mean_az_err_deg for c in cells], marker="o", label=sid)
        ax_el.plot(n, [c.mean_el_err_deg for c in cells], marker="o", label=sid)
    for ax, title in ((ax_az, "azimuth"), (ax_el, "elevation")):
        ax.set_xlabel("number of antennas")
        ax.set_ylabel(f"mean {title} error [deg]")
        ax.grid(True, alpha=0.3)
    ax_az.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
