"""Scenario-driven multipath ground truth and frequency-domain channel synthesis.

A scenario places a transmitter and a handful of specular reflectors around
the receive array (origin). Each reflector contributes one path whose delay,
arrival angles and free-space amplitude follow from the geometry; the direct
path is added unless absorbers block it. The synthesizer then emulates a
network-analyzer sweep: a complex transfer-function matrix over the selected
elements and the frequency grid, with optional white noise at a prescribed
aggregate SNR.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .array_geometry import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    SubarraySelection,
    default_cylindrical_array,
    steering_matrix,
    wavelength,
)

SCENARIO_DIR_ENV = "SAGEBENCH_SCENARIOS"

DEFAULT_DELAY_GATE_S = 1.5e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform inclusive frequency sweep."""

    start: float
    stop: float
    n_points: int

    def __post_init__(self) -> None:
        if self.stop <= self.start:
            raise ValueError("stop must exceed start")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")

    @cached_property
    def frequencies(self) -> np.ndarray:
        f = np.linspace(self.start, self.stop, self.n_points)
        f.flags.writeable = False
        return f

    @property
    def bandwidth(self) -> float:
        return self.stop - self.start

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.n_points - 1)


def default_grid() -> FrequencyGrid:
    """401 points across 3.3-3.7 GHz (1 MHz spacing)."""
    return FrequencyGrid(3.3e9, 3.7e9, 401)


class PathLabel(str, Enum):
    LOS = "LOS"
    SCREEN = "screen"
    POLE = "pole"
    BALL = "ball"
    OTHER = "other"

    @classmethod
    def parse(cls, s: str) -> "PathLabel":
        try:
            return cls(s)
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True)
class PathParams:
    """One propagation path."""

    delay: float
    azimuth: float
    elevation: float
    gain: complex
    label: PathLabel = PathLabel.OTHER

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if not 0.0 <= self.elevation <= math.pi:
            raise ValueError("elevation must lie in [0, pi]")
        if not -math.pi <= self.azimuth < math.pi:
            raise ValueError("azimuth must lie in [-pi, pi)")


@dataclass(frozen=True)
class Reflector:
    label: str
    position: tuple[float, float, float]
    reflection_loss_db: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if len(self.position) != 3:
            raise ValueError("position must be a 3-vector")
        if self.reflection_loss_db < 0:
            raise ValueError("reflection_loss_db must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    """Chamber layout: transmitter, reflectors, absorber state, noise level."""

    name: str
    tx_position: tuple[float, float, float]
    reflectors: tuple[Reflector, ...]
    los_blocked: bool
    snr_db: float | None = 50.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tx_position", tuple(float(v) for v in self.tx_position))
        if len(self.tx_position) != 3:
            raise ValueError("tx_position must be a 3-vector")
        labels = [r.label for r in self.reflectors]
        if len(set(labels)) != len(labels):
            raise ValueError("reflector labels must be unique")
        tx = np.asarray(self.tx_position, dtype=float)
        if np.linalg.norm(tx) == 0.0:
            raise ValueError("tx_position must not coincide with the array origin")
        for r in self.reflectors:
            p = np.asarray(r.position, dtype=float)
            if np.linalg.norm(p) == 0.0 or np.allclose(p, tx):
                raise ValueError(f"reflector {r.label!r} position degenerate")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tx_position": list(self.tx_position),
            "reflectors": [
                {
                    "label": r.label,
                    "position": list(r.position),
                    "reflection_loss_db": r.reflection_loss_db,
                }
                for r in self.reflectors
            ],
            "los_blocked": self.los_blocked,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            name=d["name"],
            tx_position=tuple(float(v) for v in d["tx_position"]),
            reflectors=tuple(
                Reflector(
                    label=r["label"],
                    position=tuple(float(v) for v in r["position"]),
                    reflection_loss_db=float(r.get("reflection_loss_db", 0.0)),
                )
                for r in d.get("reflectors", [])
            ),
            los_blocked=bool(d["los_blocked"]),
            snr_db=None if d.get("snr_db") is None else float(d["snr_db"]),
            seed=int(d.get("seed", 0)),
        )

    def reseeded(self, seed: int) -> "ScenarioSpec":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ChannelData:
    """Complex transfer-function snapshot: selected elements x frequency points."""

    matrix: np.ndarray
    grid: FrequencyGrid
    selection: SubarraySelection
    truth: tuple[PathParams, ...] | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (len(self.selection), self.grid.n_points):
            raise ValueError(
                f"matrix shape {m.shape} does not match selection x grid "
                f"({len(self.selection)}, {self.grid.n_points})"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))


# --------------------------------------------------------------------------
# Ground truth


def vector_angles(v: np.ndarray) -> tuple[float, float]:
    """(azimuth, elevation) of the direction of a 3-vector, azimuth in [-pi, pi)."""
    r = np.linalg.norm(v)
    if r == 0.0:
        raise ValueError("zero vector has no direction")
    az = math.atan2(v[1], v[0])
    if az >= math.pi:  # atan2 returns +pi for (-x, -0); fold into [-pi, pi)
        az = -math.pi
    el = math.acos(min(1.0, max(-1.0, v[2] / r)))
    return az, el


def ground_truth_from_scenario(
    spec: ScenarioSpec, carrier_frequency: float = 3.5e9
) -> list[PathParams]:
    """Specular path parameters implied by the scenario geometry.

    One path per reflector (two-segment free-space spreading attenuated by
    the reflection loss) plus the direct path when not blocked. Arrival
    angles are those of the source as seen from the array origin. Path
    phases are uniform random, drawn from the scenario seed. Sorted by
    delay ascending.
    """
    lam = wavelength(carrier_frequency)
    tx = np.asarray(spec.tx_position, dtype=float)
    rng = np.random.default_rng(spec.seed)

    paths: list[PathParams] = []
    for refl in spec.reflectors:
        pos = np.asarray(refl.position, dtype=float)
        d1 = float(np.linalg.norm(tx - pos))
        d2 = float(np.linalg.norm(pos))
        if d1 == 0.0 or d2 == 0.0:
            raise ValueError(f"reflector {refl.label!r} yields a zero-length segment")
        az, el = vector_angles(pos)
        amp = lam / (4.0 * math.pi * (d1 + d2)) * 10.0 ** (-refl.reflection_loss_db / 20.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        paths.append(
            PathParams(
                delay=(d1 + d2) / SPEED_OF_LIGHT,
                azimuth=az,
                elevation=el,
                gain=amp * complex(math.cos(phase), math.sin(phase)),
                label=PathLabel.parse(refl.label),
            )
        )
    if not spec.los_blocked:
        d = float(np.linalg.norm(tx))
        az, el = vector_angles(tx)
        amp = lam / (4.0 * math.pi * d)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        paths.append(
            PathParams(
                delay=d / SPEED_OF_LIGHT,
                azimuth=az,
                elevation=el,
                gain=amp * complex(math.cos(phase), math.sin(phase)),
                label=PathLabel.LOS,
            )
        )
    paths.sort(key=lambda p: p.delay)
    return paths


def apply_los_dominance(paths: list[PathParams], los_excess_db: float) -> list[PathParams]:
    """Rescale the LOS gain to sit los_excess_db above the strongest other path.

    Raises LookupError when the list has no LOS path. Order is preserved.
    """
    los_idx = [i for i, p in enumerate(paths) if p.label == PathLabel.LOS]
    if not los_idx:
        raise LookupError("no LOS path present")
    others = [abs(p.gain) for p in paths if p.label != PathLabel.LOS]
    if not others:
        return list(paths)
    target = max(others) * 10.0 ** (los_excess_db / 20.0)
    out = list(paths)
    for i in los_idx:
        p = out[i]
        scale = target / abs(p.gain)
        out[i] = replace(p, gain=p.gain * scale)
    return out


# --------------------------------------------------------------------------
# Synthesis


def path_matrix(
    geom: ArrayGeometry,
    sel: SubarraySelection,
    path: PathParams,
    grid: FrequencyGrid,
) -> np.ndarray:
    """Noise-free contribution of one path: gain * steering * delay phasor."""
    f = grid.frequencies
    sv = steering_matrix(geom, sel, path.azimuth, path.elevation, f)
    return path.gain * sv * np.exp(-2j * np.pi * f * path.delay)[None, :]


def synthesize_channel(
    geom: ArrayGeometry,
    sel: SubarraySelection,
    paths: list[PathParams],
    grid: FrequencyGrid,
    snr_db: float | None,
    seed: int,
) -> ChannelData:
    """Superimpose plane-wave paths over the grid and add white noise.

    Noise is circularly-symmetric complex Gaussian, white over elements and
    frequency, scaled so total-signal-power / total-noise-power matches
    snr_db. ``snr_db=None`` (or +inf) synthesizes noiselessly. Deterministic
    for a given seed.
    """
    if not paths:
        raise ValueError("paths must be non-empty")
    matrix = np.zeros((len(sel), grid.n_points), dtype=complex)
    for p in paths:
        if abs(p.gain) == 0.0:
            raise ValueError("synthesized paths must have nonzero gain")
        matrix += path_matrix(geom, sel, p, grid)

    if snr_db is not None and math.isfinite(snr_db):
        signal_power = float(np.sum(np.abs(matrix) ** 2))
        n_entries = matrix.size
        noise_var = signal_power / (n_entries * 10.0 ** (snr_db / 10.0))
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(matrix.shape) + 1j * rng.standard_normal(matrix.shape)
        matrix = matrix + math.sqrt(noise_var / 2.0) * noise

    return ChannelData(matrix=matrix, grid=grid, selection=sel, truth=tuple(paths))


def restrict_channel(data: ChannelData, sel: SubarraySelection) -> ChannelData:
    """Restrict a full-array snapshot to a subarray.

    Valid only when the source selection covers element indices directly
    (row i of the matrix is element data.selection.indices[i]).
    """
    lookup = {e: i for i, e in enumerate(data.selection.indices)}
    try:
        rows = [lookup[e] for e in sel.indices]
    except KeyError as exc:
        raise ValueError(f"element {exc.args[0]} not present in source selection")
    return ChannelData(
        matrix=data.matrix[rows, :], grid=data.grid, selection=sel, truth=data.truth
    )


# --------------------------------------------------------------------------
# Scenario files (YAML)


def scenario_to_document(spec: ScenarioSpec, array: ArrayGeometry | None = None) -> dict:
    doc = spec.to_dict()
    if array is not None:
        doc["array"] = array.to_dict()
    return doc


def scenario_from_document(doc: dict) -> tuple[ScenarioSpec, ArrayGeometry]:
    spec = ScenarioSpec.from_dict(doc)
    if "array" in doc:
        geom = ArrayGeometry.from_dict(doc["array"])
    else:
        geom = default_cylindrical_array()
    return spec, geom


def save_scenario(
    path: str | Path, spec: ScenarioSpec, array: ArrayGeometry | None = None
) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_document(spec, array), fh, sort_keys=False)


def load_scenario(path: str | Path) -> tuple[ScenarioSpec, ArrayGeometry]:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return scenario_from_document(doc)


def scenario_directory() -> Path:
    """Directory holding the scenario files; override with $SAGEBENCH_SCENARIOS."""
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        return Path(env)
    return Path(resources.files("sagebench") / "scenarios")  # type: ignore[arg-type]


def load_bundled_scenario(number: int) -> tuple[ScenarioSpec, ArrayGeometry]:
    """Load canonical scenario 1..4 from the scenario directory."""
    return load_scenario(scenario_directory() / f"scenario{number}.yaml")


# --------------------------------------------------------------------------
# Channel snapshot container (.npz)


def save_channel(path: str | Path, data: ChannelData) -> None:
    """Write a snapshot to .npz with interleaved real/imag float64 payload."""
    m = data.matrix
    payload = {
        "matrix_ri": np.stack([m.real, m.imag], axis=-1),
        "freq_start": np.float64(data.grid.start),
        "freq_stop": np.float64(data.grid.stop),
        "n_points": np.int64(data.grid.n_points),
        "selection_indices": np.asarray(data.selection.indices, dtype=np.int64),
        "selection_scheme": np.str_(data.selection.scheme),
    }
    if data.truth is not None:
        payload["truth_delay"] = np.array([p.delay for p in data.truth])
        payload["truth_azimuth"] = np.array([p.azimuth for p in data.truth])
        payload["truth_elevation"] = np.array([p.elevation for p in data.truth])
        g = np.array([p.gain for p in data.truth])
        payload["truth_gain_ri"] = np.stack([g.real, g.imag], axis=-1)
        payload["truth_label"] = np.array([p.label.value for p in data.truth])
    np.savez(path, **payload)


def load_channel(path: str | Path) -> ChannelData:
    with np.load(path) as z:
        ri = z["matrix_ri"]
        matrix = ri[..., 0] + 1j * ri[..., 1]
        grid = FrequencyGrid(
            float(z["freq_start"]), float(z["freq_stop"]), int(z["n_points"])
        )
        sel = SubarraySelection(
            scheme=str(z["selection_scheme"]),
            indices=tuple(int(i) for i in z["selection_indices"]),
        )
        truth = None
        if "truth_delay" in z:
            gri = z["truth_gain_ri"]
            truth = tuple(
                PathParams(
                    delay=float(d),
                    azimuth=float(a),
                    elevation=float(e),
                    gain=complex(gr, gi),
                    label=PathLabel.parse(str(lab)),
                )
                for d, a, e, (gr, gi), lab in zip(
                    z["truth_delay"],
                    z["truth_azimuth"],
                    z["truth_elevation"],
                    gri,
                    z["truth_label"],
                )
            )
    return ChannelData(matrix=matrix, grid=grid, selection=sel, truth=truth)
