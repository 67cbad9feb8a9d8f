"""Shared assertions and builders for the test suite."""

import numpy as np

from sagebench.array_geometry import (
    ArrayGeometry,
    PatternSpec,
    build_cylindrical_array,
)
from sagebench.channel import ChannelData
from sagebench.sage import EstimationResult, SageConfig, run_sage


def assert_trace_monotone(result: EstimationResult, rel_tol: float = 1e-9) -> None:
    trace = result.objective_trace
    scale = max(trace[0], 1e-300)
    for a, b in zip(trace, trace[1:]):
        assert b <= a + rel_tol * scale, f"trace increased: {a} -> {b}"


def assert_within_windows(result: EstimationResult, cfg: SageConfig) -> None:
    lo, hi = cfg.delay_range
    for p in result.paths:
        assert lo <= p.delay <= hi
        assert abs(p.azimuth) <= cfg.azimuth_window + 1e-12
        assert abs(p.elevation - np.pi / 2) <= cfg.elevation_window + 1e-12


def run_checked(data: ChannelData, geom: ArrayGeometry, cfg: SageConfig) -> EstimationResult:
    """run_sage plus the invariants every run must satisfy."""
    result = run_sage(data, geom, cfg)
    assert_trace_monotone(result)
    assert_within_windows(result, cfg)
    return result


def tiny_array(n_columns: int = 4, n_rows: int = 2, isotropic: bool = False) -> ArrayGeometry:
    pattern = PatternSpec(model="isotropic") if isotropic else PatternSpec()
    return build_cylindrical_array(
        n_columns=n_columns,
        n_rows=n_rows,
        radius=0.05,
        vertical_spacing=0.04,
        carrier_frequency=3.5e9,
        pattern=pattern,
    )
