"""SAGE multipath extraction from a frequency-domain array snapshot.

The estimator fits L superimposed plane-wave paths. Initialization is
successive cancellation on a coarsened grid; afterwards each cycle visits
the paths in descending-gain order and, per path, cancels the other current
estimates from the data (expectation step) and re-maximizes the matched
filter objective

    |<s(delay, az, el), x>|^2 / ||s||^2

by exhaustive 1-D grid searches in delay, azimuth and elevation, followed by
the closed-form gain  <s, x> / ||s||^2.  The space-frequency signature s has
entries  gain_m(az, el) * exp(j 2 pi f_k (<k, p_m>/c - delay)),  matching the
synthesis model bin by bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .array_geometry import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    SubarraySelection,
)
from .channel import ChannelData, FrequencyGrid, PathParams, path_matrix

# Initialization runs on a grid this many times coarser than the configured
# steps; the cyclic updates restore full resolution.
INIT_COARSENING = 4

CONVERGENCE_MODES = ("parameter_stall", "max_cycles_only")

COORDINATES = ("delay", "azimuth", "elevation")


@dataclass(frozen=True)
class SageConfig:
    """Grid steps, search windows and iteration controls.

    Angle windows are half-widths about the boresight reference direction
    (azimuth 0, elevation pi/2). ``n_paths=None`` means the caller derives L
    from the scenario (reflector count plus LOS).
    """

    n_paths: int | None = None
    delay_step: float = 1.0 / (50.0 * 400e6)
    azimuth_step: float = math.radians(1.0)
    elevation_step: float = math.radians(0.5)
    delay_range: tuple[float, float] = (0.0, 40e-9)
    azimuth_window: float = math.radians(45.0)
    elevation_window: float = math.radians(45.0)
    max_cycles: int = 10
    convergence: str = "parameter_stall"
    refine: bool = False

    def __post_init__(self) -> None:
        if self.n_paths is not None and self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if min(self.delay_step, self.azimuth_step, self.elevation_step) <= 0:
            raise ValueError("grid steps must be > 0")
        lo, hi = self.delay_range
        if lo < 0 or hi <= lo:
            raise ValueError("delay_range must satisfy 0 <= min < max")
        if self.azimuth_window <= 0 or self.elevation_window <= 0:
            raise ValueError("search windows must be > 0")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if self.convergence not in CONVERGENCE_MODES:
            raise ValueError(f"unknown convergence mode {self.convergence!r}")

    def resolve_paths(self, n_paths: int) -> "SageConfig":
        return replace(self, n_paths=n_paths)

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "delay_step": self.delay_step,
            "azimuth_step": self.azimuth_step,
            "elevation_step": self.elevation_step,
            "delay_range": list(self.delay_range),
            "azimuth_window": self.azimuth_window,
            "elevation_window": self.elevation_window,
            "max_cycles": self.max_cycles,
            "convergence": self.convergence,
            "refine": self.refine,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SageConfig":
        d = dict(d)
        if "delay_range" in d:
            d["delay_range"] = tuple(d["delay_range"])
        return cls(**d)


def save_config(path: str | Path, cfg: SageConfig) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def load_config(path: str | Path) -> SageConfig:
    with open(path) as fh:
        return SageConfig.from_dict(yaml.safe_load(fh))


@dataclass(frozen=True)
class EstimationResult:
    paths: tuple[PathParams, ...]
    cycles_run: int
    residual_power: float
    objective_trace: tuple[float, ...]
    subset: SubarraySelection

    def to_dict(self) -> dict:
        return {
            "paths": [
                {
                    "delay": float(p.delay),
                    "azimuth": float(p.azimuth),
                    "elevation": float(p.elevation),
                    "gain_real": float(p.gain.real),
                    "gain_imag": float(p.gain.imag),
                    "label": p.label.value,
                }
                for p in self.paths
            ],
            "cycles_run": int(self.cycles_run),
            "residual_power": float(self.residual_power),
            "objective_trace": [float(v) for v in self.objective_trace],
            "subset": {"scheme": self.subset.scheme, "indices": [int(i) for i in self.subset.indices]},
        }


def save_result(path: str | Path, result: EstimationResult) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(result.to_dict(), fh, sort_keys=False)


# --------------------------------------------------------------------------
# Grids


def grid_points(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive-of-lo uniform grid lo, lo+step, ... not exceeding hi."""
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def centered_grid(center: float, half_width: float, step: float) -> np.ndarray:
    """Symmetric grid center +/- k*step covering at most +/- half_width.

    Centering guarantees the window's reference direction is itself a grid
    point at every coarsening level, so the boresight reference never falls
    between cells.
    """
    n = int(math.floor(half_width / step + 1e-9))
    return center + step * np.arange(-n, n + 1)


def search_grids(cfg: SageConfig, coarsening: int = 1) -> dict[str, np.ndarray]:
    return {
        "delay": grid_points(
            cfg.delay_range[0], cfg.delay_range[1], cfg.delay_step * coarsening
        ),
        "azimuth": centered_grid(
            0.0, cfg.azimuth_window, cfg.azimuth_step * coarsening
        ),
        "elevation": centered_grid(
            math.pi / 2, cfg.elevation_window, cfg.elevation_step * coarsening
        ),
    }


# --------------------------------------------------------------------------
# Matched-filter machinery


class _Workspace:
    """Per-snapshot arrays shared by the search routines."""

    def __init__(self, data: ChannelData, geom: ArrayGeometry):
        idx = data.selection.index_array
        if idx.size and idx.max() >= geom.n_elements:
            raise ValueError("selection indices exceed the array size")
        self.freqs = data.grid.frequencies
        self.positions = geom.positions[idx]
        self.boresights = geom.boresights[idx]
        self.pattern = geom.pattern
        self.n_freq = len(self.freqs)
        self.n_elem = len(idx)

    def beamform(self, matrix: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pattern-weighted conjugate-steered sums per direction.

        Returns (y, norms): y[d, k] = sum_m g_dm exp(-j 2 pi f_k u_dm / c) X[m, k]
        and norms[d] = K * sum_m g_dm^2 (the squared signature norm).

        The per-bin phasors over the uniform frequency grid form a geometric
        progression, so each (direction, element) row is built by a running
        product of a single ratio phasor instead of a full complex exp; that
        is the hot loop of every grid search.
        """
        u = dirs @ self.positions.T  # (D, M)
        g = np.asarray(self.pattern.amplitude(dirs @ self.boresights.T), dtype=float)
        norms = self.n_freq * np.sum(g * g, axis=1)
        f0 = self.freqs[0]
        df = (self.freqs[-1] - self.freqs[0]) / (self.n_freq - 1)
        y = np.empty((len(dirs), self.n_freq), dtype=complex)
        chunk = max(1, int(2_000_000 // max(1, self.n_elem * self.n_freq)))
        for s in range(0, len(dirs), chunk):
            e = slice(s, min(s + chunk, len(dirs)))
            t = (-2j * np.pi / SPEED_OF_LIGHT) * u[e]
            base = np.exp(t * f0) * g[e]
            ratio = np.exp(t * df)
            block = np.empty(base.shape + (self.n_freq,), dtype=complex)
            block[:, :, 0] = base
            block[:, :, 1:] = ratio[:, :, None]
            np.cumprod(block, axis=2, out=block)
            block *= matrix[None, :, :]
            y[e] = block.sum(axis=1)
        return y, norms

    @staticmethod
    def delay_phasors(freqs: np.ndarray, delays: np.ndarray) -> np.ndarray:
        return np.exp(2j * np.pi * np.outer(freqs, delays))


def _direction_vectors(azimuths: np.ndarray, elevations: np.ndarray) -> np.ndarray:
    az = np.asarray(azimuths, dtype=float)
    el = np.asarray(elevations, dtype=float)
    se = np.sin(el)
    return np.stack([se * np.cos(az), se * np.sin(az), np.cos(el)], axis=-1)


def _inner_and_norm(
    ws: _Workspace, matrix: np.ndarray, delay: float, azimuth: float, elevation: float
) -> tuple[complex, float]:
    dirs = _direction_vectors(np.array([azimuth]), np.array([elevation]))
    y, norms = ws.beamform(matrix, dirs)
    inner = y[0] @ np.exp(2j * np.pi * ws.freqs * delay)
    return complex(inner), float(norms[0])


def objective(
    data: ChannelData,
    geom: ArrayGeometry,
    delay: float,
    azimuth: float,
    elevation: float,
) -> float:
    """Matched-filter score |<s, X>|^2 / ||s||^2 for one parameter triple."""
    ws = _Workspace(data, geom)
    inner, norm = _inner_and_norm(ws, data.matrix, delay, azimuth, elevation)
    if norm == 0.0:
        return 0.0
    return abs(inner) ** 2 / norm


def estimate_gain(
    data: ChannelData,
    geom: ArrayGeometry,
    delay: float,
    azimuth: float,
    elevation: float,
) -> complex:
    """Closed-form least-squares gain <s, X> / ||s||^2."""
    ws = _Workspace(data, geom)
    inner, norm = _inner_and_norm(ws, data.matrix, delay, azimuth, elevation)
    return inner / norm if norm > 0.0 else 0.0 + 0.0j


def _argmax_3d(
    ws: _Workspace, matrix: np.ndarray, grids: dict[str, np.ndarray]
) -> tuple[float, float, float, complex, float]:
    """Exhaustive search over delay x azimuth x elevation.

    Ties resolve to the lexicographically smallest (delay, azimuth,
    elevation) triple. Returns the argmax plus its inner product and
    signature norm.
    """
    delays = grids["delay"]
    azimuths = grids["azimuth"]
    elevations = grids["elevation"]
    n_az, n_el = len(azimuths), len(elevations)
    dirs = _direction_vectors(
        np.repeat(azimuths, n_el), np.tile(elevations, n_az)
    )
    y, norms = ws.beamform(matrix, dirs)
    phasors = ws.delay_phasors(ws.freqs, delays)  # (K, T)
    inners = y @ phasors  # (D, T)
    safe = np.where(norms > 0.0, norms, 1.0)
    scores = (np.abs(inners) ** 2 / safe[:, None]) * (norms > 0.0)[:, None]
    # (T, n_az, n_el) so the flat argmax tie-breaks lexicographically
    cube = scores.T.reshape(len(delays), n_az, n_el)
    it, ia, ie = np.unravel_index(int(np.argmax(cube)), cube.shape)
    d = ia * n_el + ie
    return (
        float(delays[it]),
        float(azimuths[ia]),
        float(elevations[ie]),
        complex(inners[d, it]),
        float(norms[d]),
    )


# --------------------------------------------------------------------------
# SAGE steps


def _reconstruct_others(
    data: ChannelData, paths: list[PathParams], skip: int, geom: ArrayGeometry
) -> np.ndarray:
    out = np.array(data.matrix)
    for i, p in enumerate(paths):
        if i == skip or p.gain == 0:
            continue
        out -= path_matrix(geom, data.selection, p, data.grid)
    return out


def expectation_step(
    data: ChannelData, paths: list[PathParams], l: int, geom: ArrayGeometry
) -> np.ndarray:
    """Data with every current path estimate except path l cancelled."""
    if not 0 <= l < len(paths):
        raise ValueError("path index out of range")
    return _reconstruct_others(data, paths, l, geom)


def residual_power(data: ChannelData, paths: list[PathParams], geom: ArrayGeometry) -> float:
    return float(np.sum(np.abs(_reconstruct_others(data, paths, -1, geom)) ** 2))


def initialize_paths(
    data: ChannelData, geom: ArrayGeometry, cfg: SageConfig
) -> list[PathParams]:
    """Successive-cancellation initialization on a coarsened grid.

    Returns n_paths estimates sorted by descending gain magnitude.
    """
    if cfg.n_paths is None:
        raise ValueError("cfg.n_paths must be set")
    if data.total_power == 0.0:
        raise ValueError("cannot initialize on all-zero data")
    ws = _Workspace(data, geom)
    grids = search_grids(cfg, coarsening=INIT_COARSENING)
    residual = np.array(data.matrix)
    paths: list[PathParams] = []
    for _ in range(cfg.n_paths):
        delay, az, el, inner, norm = _argmax_3d(ws, residual, grids)
        gain = inner / norm if norm > 0.0 else 0.0 + 0.0j
        path = PathParams(delay=delay, azimuth=az, elevation=el, gain=gain)
        if gain != 0:
            residual -= path_matrix(geom, data.selection, path, data.grid)
        paths.append(path)
    paths.sort(key=lambda p: -abs(p.gain))
    return paths


def _polish_gains(
    data: ChannelData, paths: list[PathParams], geom: ArrayGeometry
) -> list[PathParams]:
    """Joint least-squares gain re-fit at fixed path coordinates.

    Solving the linear subproblem exactly makes every gain equal to its own
    closed-form estimate on its expectation-step residual (the normal
    equations), which the per-path sequential updates only approach
    asymptotically. Never increases the residual.
    """
    columns = [
        path_matrix(geom, data.selection, replace(p, gain=1.0 + 0.0j), data.grid).ravel()
        for p in paths
    ]
    basis = np.stack(columns, axis=1)
    gains, *_ = np.linalg.lstsq(basis, data.matrix.ravel(), rcond=None)
    return [replace(p, gain=complex(g)) for p, g in zip(paths, gains)]


def _search_1d(
    ws: _Workspace,
    matrix: np.ndarray,
    current: PathParams,
    coordinate: str,
    grid: np.ndarray,
    refine: bool,
    step: float,
) -> PathParams:
    """Grid-maximize one coordinate, holding the others at their current values."""
    if coordinate == "delay":
        dirs = _direction_vectors(
            np.array([current.azimuth]), np.array([current.elevation])
        )
        y, norms = ws.beamform(matrix, dirs)
        inners = (y @ ws.delay_phasors(ws.freqs, grid))[0]  # (T,)
        norms = np.full(len(grid), norms[0])
    elif coordinate == "azimuth":
        dirs = _direction_vectors(grid, np.full(len(grid), current.elevation))
        y, norms = ws.beamform(matrix, dirs)
        inners = y @ np.exp(2j * np.pi * ws.freqs * current.delay)
    elif coordinate == "elevation":
        dirs = _direction_vectors(np.full(len(grid), current.azimuth), grid)
        y, norms = ws.beamform(matrix, dirs)
        inners = y @ np.exp(2j * np.pi * ws.freqs * current.delay)
    else:
        raise ValueError(f"unknown coordinate {coordinate!r}")

    safe = np.where(norms > 0.0, norms, 1.0)
    scores = (np.abs(inners) ** 2 / safe) * (norms > 0.0)
    i = int(np.argmax(scores))  # first occurrence = smallest coordinate on ties
    best_value = float(grid[i])
    best_gain = inners[i] / norms[i] if norms[i] > 0.0 else 0.0 + 0.0j

    def with_coordinate(value: float, gain: complex) -> PathParams:
        kwargs = {coordinate: value, "gain": gain}
        return replace(current, **kwargs)

    if not refine:
        return with_coordinate(best_value, best_gain)

    candidate = with_coordinate(best_value, best_gain)
    cand_score = float(scores[i])
    if 0 < i < len(grid) - 1:
        denom = scores[i - 1] - 2.0 * scores[i] + scores[i + 1]
        if denom < 0.0:
            offset = 0.5 * (scores[i - 1] - scores[i + 1]) / denom
            offset = float(np.clip(offset, -0.5, 0.5))
            refined_value = best_value + offset * step
            triple = {
                "delay": current.delay,
                "azimuth": current.azimuth,
                "elevation": current.elevation,
                coordinate: refined_value,
            }
            inner, norm = _inner_and_norm(
                ws, matrix, triple["delay"], triple["azimuth"], triple["elevation"]
            )
            refined_score = abs(inner) ** 2 / norm if norm > 0.0 else 0.0
            if refined_score > cand_score:
                candidate = with_coordinate(refined_value, inner / norm)
                cand_score = refined_score

    # Off-grid current values (earlier refinements) may beat the grid; keep
    # the better of the two so the residual never increases.
    cur_inner, cur_norm = _inner_and_norm(
        ws, matrix, current.delay, current.azimuth, current.elevation
    )
    cur_score = abs(cur_inner) ** 2 / cur_norm if cur_norm > 0.0 else 0.0
    if cur_score > cand_score:
        return replace(current, gain=cur_inner / cur_norm)
    return candidate


def maximize_coordinate(
    xhat: np.ndarray,
    geom: ArrayGeometry,
    sel: SubarraySelection,
    grid: FrequencyGrid,
    current: PathParams,
    coordinate: str,
    cfg: SageConfig,
) -> PathParams:
    """One SAGE maximization: full 1-D grid search over one coordinate.

    Ties break toward the smallest coordinate value; the gain is re-estimated
    in closed form at the selected point.
    """
    data = ChannelData(matrix=xhat, grid=grid, selection=sel)
    ws = _Workspace(data, geom)
    grids = search_grids(cfg)
    steps = {
        "delay": cfg.delay_step,
        "azimuth": cfg.azimuth_step,
        "elevation": cfg.elevation_step,
    }
    return _search_1d(
        ws, data.matrix, current, coordinate, grids[coordinate], cfg.refine, steps[coordinate]
    )


def run_sage(data: ChannelData, geom: ArrayGeometry, cfg: SageConfig) -> EstimationResult:
    """Full estimation: initialization plus cyclic coordinate updates.

    The objective trace records residual power after initialization and
    after each cycle; it is non-increasing. Non-convergence within
    max_cycles is not an error.
    """
    if cfg.n_paths is None:
        raise ValueError("cfg.n_paths must be set")
    paths = initialize_paths(data, geom, cfg)
    ws = _Workspace(data, geom)
    grids = search_grids(cfg)
    steps = {
        "delay": cfg.delay_step,
        "azimuth": cfg.azimuth_step,
        "elevation": cfg.elevation_step,
    }
    trace = [residual_power(data, paths, geom)]
    cycles_run = 0
    for _ in range(cfg.max_cycles):
        before = list(paths)
        order = sorted(range(len(paths)), key=lambda i: -abs(paths[i].gain))
        for l in order:
            xhat = _reconstruct_others(data, paths, l, geom)
            p = paths[l]
            for coordinate in COORDINATES:
                p = _search_1d(
                    ws, xhat, p, coordinate, grids[coordinate], cfg.refine, steps[coordinate]
                )
            paths[l] = p
        paths = _polish_gains(data, paths, geom)
        cycles_run += 1
        trace.append(residual_power(data, paths, geom))
        if cfg.convergence == "parameter_stall":
            stalled = all(
                abs(a.delay - b.delay) < cfg.delay_step
                and abs(a.azimuth - b.azimuth) < cfg.azimuth_step
                and abs(a.elevation - b.elevation) < cfg.elevation_step
                for a, b in zip(before, paths)
            )
            if stalled:
                break
    return EstimationResult(
        paths=tuple(paths),
        cycles_run=cycles_run,
        residual_power=trace[-1],
        objective_trace=tuple(trace),
        subset=data.selection,
    )
