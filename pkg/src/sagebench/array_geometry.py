"""Cylindrical receive-array model: element layout, patterns, subarrays, steering.

The array is a regular polygon cylinder of vertical element columns. Angles
follow one convention throughout the package: azimuth is measured in the
horizontal plane from the +x axis (range [-pi, pi)), elevation is the polar
angle from the +z cylinder axis (range [0, pi], so pi/2 is the horizon).
The arrival unit vector for a direction (az, el) is

    k = (sin(el) cos(az), sin(el) sin(az), cos(el))

and steering phases are referenced to the cylinder axis at mid-height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299792458.0

DEFAULT_CARRIER_HZ = 3.5e9
DEFAULT_N_COLUMNS = 16
DEFAULT_N_ROWS = 4

PATTERN_MODELS = ("isotropic", "cosine_power")

# Amplitude floor behind the element, -40 dB.
DEFAULT_BACK_LOBE_FLOOR = 10.0 ** (-40.0 / 20.0)


def wavelength(frequency: float) -> float:
    return SPEED_OF_LIGHT / frequency


def arrival_unit_vector(azimuth: float, elevation: float) -> np.ndarray:
    """Unit vector pointing from the array origin toward the source."""
    se = math.sin(elevation)
    return np.array(
        [se * math.cos(azimuth), se * math.sin(azimuth), math.cos(elevation)]
    )


@dataclass(frozen=True)
class PatternSpec:
    """Element radiation pattern.

    ``cosine_power`` applies ``exponent`` to the power pattern
    cos(angle off boresight), i.e. amplitude = cos(psi)^(exponent/2),
    clamped to ``back_lobe_floor`` (linear amplitude) behind the element.
    The default exponent of 4 gives a 66-degree half-power beamwidth,
    typical of a patch element on a conducting cylinder.
    """

    model: str = "cosine_power"
    exponent: float = 4.0
    back_lobe_floor: float = DEFAULT_BACK_LOBE_FLOOR

    def __post_init__(self) -> None:
        if self.model not in PATTERN_MODELS:
            raise ValueError(f"unknown pattern model {self.model!r}")
        if self.exponent < 0:
            raise ValueError("pattern exponent must be >= 0")
        if not 0.0 <= self.back_lobe_floor <= 1.0:
            raise ValueError("back_lobe_floor must lie in [0, 1]")

    def amplitude(self, cos_off_boresight: np.ndarray | float) -> np.ndarray | float:
        """Amplitude gain given cos of the angle between direction and boresight."""
        if self.model == "isotropic":
            return np.ones_like(np.asarray(cos_off_boresight, dtype=float))
        front = np.clip(cos_off_boresight, 0.0, 1.0)
        return np.maximum(front ** (self.exponent / 2.0), self.back_lobe_floor)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "exponent": self.exponent,
            "back_lobe_floor": self.back_lobe_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatternSpec":
        return cls(**d)


@dataclass(frozen=True)
class ElementGeometry:
    """One antenna element: position, outward boresight, pattern."""

    position: np.ndarray
    boresight: np.ndarray
    pattern: PatternSpec

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=float).reshape(3)
        bore = np.asarray(self.boresight, dtype=float).reshape(3)
        norm = np.linalg.norm(bore)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("boresight must be a unit vector")
        pos.flags.writeable = False
        bore.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "boresight", bore)


@dataclass(frozen=True)
class ArrayGeometry:
    """Cylindrical array of n_columns x n_rows elements, column-major order.

    Element index = column * n_rows + row. Column k sits at azimuth
    k * 360/n_columns degrees; rows are centered about z = 0.
    """

    elements: tuple[ElementGeometry, ...]
    carrier_frequency: float
    n_columns: int
    n_rows: int
    radius: float
    vertical_spacing: float

    def __post_init__(self) -> None:
        if len(self.elements) != self.n_columns * self.n_rows:
            raise ValueError("element count must equal n_columns * n_rows")

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def positions(self) -> np.ndarray:
        """(N, 3) element positions, read-only."""
        p = np.array([e.position for e in self.elements])
        p.flags.writeable = False
        return p

    @cached_property
    def boresights(self) -> np.ndarray:
        b = np.array([e.boresight for e in self.elements])
        b.flags.writeable = False
        return b

    @property
    def pattern(self) -> PatternSpec:
        return self.elements[0].pattern

    def column_of(self, index: int) -> int:
        return index // self.n_rows

    def row_of(self, index: int) -> int:
        return index % self.n_rows

    def to_dict(self) -> dict:
        return {
            "n_columns": self.n_columns,
            "n_rows": self.n_rows,
            "radius": self.radius,
            "vertical_spacing": self.vertical_spacing,
            "carrier_frequency": self.carrier_frequency,
            "pattern": self.pattern.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return build_cylindrical_array(
            n_columns=d["n_columns"],
            n_rows=d["n_rows"],
            radius=d["radius"],
            vertical_spacing=d["vertical_spacing"],
            carrier_frequency=d["carrier_frequency"],
            pattern=PatternSpec.from_dict(d["pattern"]),
        )


def build_cylindrical_array(
    n_columns: int,
    n_rows: int,
    radius: float,
    vertical_spacing: float,
    carrier_frequency: float,
    pattern: PatternSpec | None = None,
) -> ArrayGeometry:
    """Construct the cylindrical array geometry.

    Raises ValueError on non-positive counts or dimensions.
    """
    if n_columns < 1 or n_rows < 1:
        raise ValueError("n_columns and n_rows must be >= 1")
    if radius <= 0 or vertical_spacing <= 0 or carrier_frequency <= 0:
        raise ValueError("radius, vertical_spacing and carrier_frequency must be > 0")
    pattern = pattern or PatternSpec()

    elements = []
    z0 = -(n_rows - 1) / 2.0 * vertical_spacing
    for col in range(n_columns):
        alpha = 2.0 * math.pi * col / n_columns
        ca, sa = math.cos(alpha), math.sin(alpha)
        for row in range(n_rows):
            pos = np.array([radius * ca, radius * sa, z0 + row * vertical_spacing])
            bore = np.array([ca, sa, 0.0])
            elements.append(ElementGeometry(pos, bore, pattern))
    return ArrayGeometry(
        elements=tuple(elements),
        carrier_frequency=carrier_frequency,
        n_columns=n_columns,
        n_rows=n_rows,
        radius=radius,
        vertical_spacing=vertical_spacing,
    )


def default_cylindrical_array(
    carrier_frequency: float = DEFAULT_CARRIER_HZ,
    pattern: PatternSpec | None = None,
) -> ArrayGeometry:
    """16 columns x 4 rows with half-wavelength sampling.

    Vertical spacing is lambda/2 and the radius is chosen so the chord
    between adjacent columns is also lambda/2.
    """
    half = wavelength(carrier_frequency) / 2.0
    radius = half / (2.0 * math.sin(math.pi / DEFAULT_N_COLUMNS))
    return build_cylindrical_array(
        n_columns=DEFAULT_N_COLUMNS,
        n_rows=DEFAULT_N_ROWS,
        radius=radius,
        vertical_spacing=half,
        carrier_frequency=carrier_frequency,
        pattern=pattern,
    )


# --------------------------------------------------------------------------
# Subarray selection


@dataclass(frozen=True)
class ColumnScheme:
    """Uniformly spaced column subset: column ids congruent to rotation_offset
    modulo n_columns/n_cols."""

    n_cols: int
    rotation_offset: int = 0

    def describe(self) -> str:
        return f"columns:{self.n_cols}"


@dataclass(frozen=True)
class RowScheme:
    """Contiguous block of rows across every column."""

    n_rows: int
    offset: int = 0

    def describe(self) -> str:
        return f"rows:{self.n_rows}"


@dataclass(frozen=True)
class ExplicitScheme:
    indices: tuple[int, ...]

    def describe(self) -> str:
        return f"explicit:{len(self.indices)}"


Scheme = ColumnScheme | RowScheme | ExplicitScheme


@dataclass(frozen=True)
class SubarraySelection:
    """Resolved, ordered element-index subset of an array."""

    scheme: str
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selection indices must be unique")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def index_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)


def select_subarray(geom: ArrayGeometry, scheme: Scheme) -> SubarraySelection:
    """Resolve a selection scheme to an ordered element-index list."""
    n = geom.n_elements
    if isinstance(scheme, ColumnScheme):
        if scheme.n_cols < 1 or geom.n_columns % scheme.n_cols != 0:
            raise ValueError(
                f"n_cols={scheme.n_cols} must divide n_columns={geom.n_columns}"
            )
        stride = geom.n_columns // scheme.n_cols
        if not 0 <= scheme.rotation_offset < stride:
            raise ValueError(f"rotation_offset must lie in [0, {stride})")
        cols = range(scheme.rotation_offset, geom.n_columns, stride)
        indices = tuple(
            c * geom.n_rows + r for c in cols for r in range(geom.n_rows)
        )
    elif isinstance(scheme, RowScheme):
        if scheme.n_rows < 1 or scheme.offset < 0:
            raise ValueError("row count must be >= 1 and offset >= 0")
        if scheme.offset + scheme.n_rows > geom.n_rows:
            raise ValueError("row selection exceeds array rows")
        rows = range(scheme.offset, scheme.offset + scheme.n_rows)
        indices = tuple(
            c * geom.n_rows + r for c in range(geom.n_columns) for r in rows
        )
    elif isinstance(scheme, ExplicitScheme):
        indices = tuple(int(i) for i in scheme.indices)
        if any(i < 0 or i >= n for i in indices):
            raise ValueError("explicit indices out of range")
    else:
        raise TypeError(f"unsupported scheme {scheme!r}")
    return SubarraySelection(scheme=scheme.describe(), indices=indices)


def full_selection(geom: ArrayGeometry) -> SubarraySelection:
    return select_subarray(geom, ColumnScheme(geom.n_columns, 0))


def enumerate_rotations(geom: ArrayGeometry, n_cols: int) -> list[SubarraySelection]:
    """All rotation offsets of an n_cols column scheme.

    The returned selections partition the columns: pairwise disjoint, union
    covering every column.
    """
    if n_cols < 1 or geom.n_columns % n_cols != 0:
        raise ValueError(f"n_cols={n_cols} must divide n_columns={geom.n_columns}")
    stride = geom.n_columns // n_cols
    return [select_subarray(geom, ColumnScheme(n_cols, r)) for r in range(stride)]


# --------------------------------------------------------------------------
# Steering


def element_gain(elem: ElementGeometry, azimuth: float, elevation: float) -> float:
    """Real non-negative amplitude gain of one element toward (azimuth, elevation)."""
    k = arrival_unit_vector(azimuth, elevation)
    return float(elem.pattern.amplitude(float(k @ elem.boresight)))


def element_gains(
    geom: ArrayGeometry, sel: SubarraySelection, azimuth: float, elevation: float
) -> np.ndarray:
    """Vectorized element_gain over a selection; shape (len(sel),)."""
    k = arrival_unit_vector(azimuth, elevation)
    cosoff = geom.boresights[sel.index_array] @ k
    return np.asarray(geom.pattern.amplitude(cosoff), dtype=float)


def steering_vector(
    geom: ArrayGeometry,
    sel: SubarraySelection,
    azimuth: float,
    elevation: float,
    frequency: float,
) -> np.ndarray:
    """Far-field array response for one direction at one frequency.

    Entry m is gain_m * exp(+j 2 pi (f/c) <k, p_m>) with the phase referenced
    to the cylinder axis at mid-height.
    """
    if frequency <= 0:
        raise ValueError("frequency must be > 0")
    return steering_matrix(geom, sel, azimuth, elevation, np.array([frequency]))[:, 0]


def steering_matrix(
    geom: ArrayGeometry,
    sel: SubarraySelection,
    azimuth: float,
    elevation: float,
    frequencies: np.ndarray,
) -> np.ndarray:
    """Steering vectors stacked over a frequency grid; shape (len(sel), K).

    The phase uses each bin frequency, not the carrier, so wideband delay and
    angle coupling is preserved.
    """
    freqs = np.asarray(frequencies, dtype=float)
    idx = sel.index_array
    k = arrival_unit_vector(azimuth, elevation)
    path_len = geom.positions[idx] @ k  # (M,)
    gains = np.asarray(geom.pattern.amplitude(geom.boresights[idx] @ k), dtype=float)
    phase = (2.0 * np.pi / SPEED_OF_LIGHT) * np.outer(path_len, freqs)
    return gains[:, None] * np.exp(1j * phase)
