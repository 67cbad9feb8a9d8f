"""Brute-force reference implementations for the test suite.

Everything here recomputes signatures and geometry from first principles,
on purpose: the point of these oracles is to catch bugs shared between the
estimator and the synthesizer, so they must not call into the estimator's
inner-product code. Performance is a non-goal; a point cap keeps runs
bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_geometry import ArrayGeometry
from .channel import ChannelData

_C = 299792458.0

DEFAULT_POINT_CAP = 10_000_000


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    step: float

    def points(self) -> np.ndarray:
        n = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(n)


@dataclass(frozen=True)
class GridSpec:
    delay: Axis
    azimuth: Axis
    elevation: Axis
    point_cap: int = DEFAULT_POINT_CAP

    @property
    def total_points(self) -> int:
        return (
            len(self.delay.points())
            * len(self.azimuth.points())
            * len(self.elevation.points())
        )


def _pattern_amplitudes(geom: ArrayGeometry, cos_off: np.ndarray) -> np.ndarray:
    p = geom.pattern
    if p.model == "isotropic":
        return np.ones_like(cos_off)
    front = np.clip(cos_off, 0.0, 1.0) ** (p.exponent / 2.0)
    return np.maximum(front, p.back_lobe_floor)


def _signature(
    geom: ArrayGeometry,
    positions: np.ndarray,
    boresights: np.ndarray,
    freqs: np.ndarray,
    delay: float,
    azimuth: float,
    elevation: float,
) -> np.ndarray:
    se = math.sin(elevation)
    k = np.array([se * math.cos(azimuth), se * math.sin(azimuth), math.cos(elevation)])
    proj = positions @ k
    g = _pattern_amplitudes(geom, boresights @ k)
    return g[:, None] * np.exp(2j * math.pi * freqs * (proj[:, None] / _C - delay))


def exhaustive_search(
    data: ChannelData, geom: ArrayGeometry, grid: GridSpec
) -> tuple[tuple[float, float, float], float]:
    """Argmax of |<s, X>|^2 / ||s||^2 over the full grid by direct summation.

    Ties resolve to the lexicographically smallest (delay, azimuth,
    elevation). Raises ValueError when the grid exceeds the point cap.
    """
    if grid.total_points > grid.point_cap:
        raise ValueError(
            f"grid has {grid.total_points} points, exceeding cap {grid.point_cap}"
        )
    delays = grid.delay.points()
    azimuths = grid.azimuth.points()
    elevations = grid.elevation.points()
    freqs = data.grid.frequencies
    positions = np.array([geom.elements[m].position for m in data.selection.indices])
    boresights = np.array([geom.elements[m].boresight for m in data.selection.indices])
    X = data.matrix

    best_score = -1.0
    best = (delays[0], azimuths[0], elevations[0])
    for delay in delays:
        for az in azimuths:
            for el in elevations:
                s = _signature(geom, positions, boresights, freqs, delay, az, el)
                norm = float(np.sum(np.abs(s) ** 2))
                if norm == 0.0:
                    score = 0.0
                else:
                    inner = np.sum(np.conj(s) * X)
                    score = abs(inner) ** 2 / norm
                if score > best_score:
                    best_score = score
                    best = (float(delay), float(az), float(el))
    return best, best_score


def trig_ground_truth(
    tx: np.ndarray, reflector: np.ndarray, rx_origin: np.ndarray
) -> tuple[float, float, float]:
    """(delay, azimuth, elevation) of the tx -> reflector -> rx specular path.

    Scalar trigonometry only; independent of the synthesizer's vector code.
    """
    tx = np.asarray(tx, dtype=float)
    reflector = np.asarray(reflector, dtype=float)
    rx_origin = np.asarray(rx_origin, dtype=float)
    d1 = math.dist(tx, reflector)
    d2 = math.dist(reflector, rx_origin)
    if d1 == 0.0 or d2 == 0.0:
        raise ValueError("tx, reflector and rx positions must be distinct")
    dx = reflector[0] - rx_origin[0]
    dy = reflector[1] - rx_origin[1]
    dz = reflector[2] - rx_origin[2]
    azimuth = math.atan2(dy, dx)
    if azimuth >= math.pi:
        azimuth = -math.pi
    elevation = math.acos(max(-1.0, min(1.0, dz / d2)))
    return (d1 + d2) / _C, azimuth, elevation
