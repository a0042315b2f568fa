"""Grids, array containers and configuration objects shared by all operators.

Every container is immutable after construction: arrays are copied on the way
in and flagged read-only, so a plan or image can be shared between solvers
without defensive copies.

Axis conventions
----------------
Arrays are ``(n_x, n_z)``: A-scan index first, spectral/axial index second.
Images span the full delay range with zero delay at axial index ``n_z // 2``;
indices above it are positive delay.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "GridSpec",
    "RealSpectra",
    "ComplexSpectra",
    "SusceptibilityImage",
    "DispersionModel",
    "WeightVector",
    "make_grid",
    "as_array",
    "SPACE_XK",
    "SPACE_QK",
]

SPACE_XK = "x-k"
SPACE_QK = "qx-k"

_UNIFORM_RTOL = 1e-9
_MAX_DISPERSION_ORDER = 5


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _check_uniform(k_grid: np.ndarray) -> None:
    diffs = np.diff(k_grid)
    if np.any(diffs <= 0):
        raise ValueError("k_grid must be strictly increasing")
    mean = diffs.mean()
    if np.max(np.abs(diffs - mean)) >= _UNIFORM_RTOL * mean:
        raise ValueError("k_grid is not uniformly spaced")


@dataclass(frozen=True)
class GridSpec:
    """Acquisition geometry of one B-scan.

    Parameters
    ----------
    n_x : int
        Number of A-scans.
    n_z : int
        Spectral samples per A-scan; also the number of axial image pixels.
    k_min, k_max : float
        Wavenumber range in rad/um, sampled uniformly with ``n_z`` points.
    lateral_pitch : float
        Distance between adjacent A-scans in um.
    focal_z_index : int
        Axial pixel holding the focal plane.
    """

    n_x: int
    n_z: int
    k_min: float
    k_max: float
    lateral_pitch: float
    focal_z_index: int
    k_grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("n_x", "n_z", "focal_z_index"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_x < 2:
            raise ValueError(f"n_x must be >= 2, got {self.n_x}")
        if self.n_z < 4:
            raise ValueError(f"n_z must be >= 4, got {self.n_z}")
        if self.n_z % 2:
            raise ValueError(f"n_z must be even so zero delay sits on a pixel, got {self.n_z}")
        for name in ("k_min", "k_max", "lateral_pitch"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not 0 < self.k_min < self.k_max:
            raise ValueError(
                f"need 0 < k_min < k_max, got k_min={self.k_min}, k_max={self.k_max}"
            )
        if self.lateral_pitch <= 0:
            raise ValueError("lateral_pitch must be positive")
        if not 0 <= self.focal_z_index < self.n_z:
            raise ValueError(
                f"focal_z_index {self.focal_z_index} outside [0, {self.n_z})"
            )
        k_grid = np.linspace(self.k_min, self.k_max, self.n_z)
        _check_uniform(k_grid)
        object.__setattr__(self, "k_grid", _readonly(k_grid))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.n_z)

    @property
    def dk(self) -> float:
        return (self.k_max - self.k_min) / (self.n_z - 1)

    @property
    def axial_pitch(self) -> float:
        """Axial pixel size in um (conjugate to the wavenumber step)."""
        return np.pi / (self.n_z * self.dk)

    @property
    def zero_delay_index(self) -> int:
        return self.n_z // 2

    @property
    def k_center(self) -> float:
        return 0.5 * (self.k_min + self.k_max)

    @property
    def q_x(self) -> np.ndarray:
        """Transverse spatial frequencies in rad/um, FFT ordering."""
        return 2 * np.pi * np.fft.fftfreq(self.n_x, d=self.lateral_pitch)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.lateral_pitch

    @property
    def z(self) -> np.ndarray:
        """Axial positions in um relative to zero delay."""
        return (np.arange(self.n_z) - self.zero_delay_index) * self.axial_pitch

    def replace(self, **changes) -> "GridSpec":
        params = self.to_dict()
        params.update(changes)
        return GridSpec(**params)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_x": self.n_x,
            "n_z": self.n_z,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "lateral_pitch": self.lateral_pitch,
            "focal_z_index": self.focal_z_index,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GridSpec":
        return cls(**{key: d[key] for key in (
            "n_x", "n_z", "k_min", "k_max", "lateral_pitch", "focal_z_index")})


def make_grid(n_x, n_z, k_min, k_max, lateral_pitch, focal_z_index=None) -> GridSpec:
    """Build a :class:`GridSpec`; the focal plane defaults to zero delay."""
    if focal_z_index is None:
        focal_z_index = n_z // 2
    return GridSpec(n_x, n_z, k_min, k_max, lateral_pitch, focal_z_index)


def _check_array(data, grid: GridSpec, dtype, what: str) -> np.ndarray:
    arr = np.asarray(data)
    if np.iscomplexobj(arr) and dtype is np.float64:
        raise TypeError(f"{what} must be real-valued")
    arr = arr.astype(dtype, copy=False)
    if arr.shape != grid.shape:
        raise ValueError(f"{what} has shape {arr.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return _readonly(arr)


@dataclass(frozen=True, eq=False)
class RealSpectra:
    """Background-subtracted real interferograms, one row per A-scan."""

    data: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        object.__setattr__(
            self, "data", _check_array(self.data, self.grid, np.float64, "RealSpectra")
        )


@dataclass(frozen=True, eq=False)
class ComplexSpectra:
    """Complex spectra in ``x-k`` or ``qx-k`` space."""

    data: np.ndarray
    grid: GridSpec
    space: str = SPACE_XK

    def __post_init__(self):
        if self.space not in (SPACE_XK, SPACE_QK):
            raise ValueError(f"unknown space tag {self.space!r}")
        object.__setattr__(
            self, "data",
            _check_array(self.data, self.grid, np.complex128, "ComplexSpectra"),
        )


@dataclass(frozen=True, eq=False)
class SusceptibilityImage:
    """Complex full-range image on the ``(x, z)`` grid."""

    data: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        object.__setattr__(
            self, "data",
            _check_array(self.data, self.grid, np.complex128, "SusceptibilityImage"),
        )

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)


@dataclass(frozen=True, eq=False)
class DispersionModel:
    """Dispersion phase polynomial sampled on a wavenumber grid.

    ``coeffs`` holds ``a_2 .. a_Np``; constant and linear terms are fixed at
    zero since they only shift or rephase the image.
    """

    k_0: float
    coeffs: tuple[float, ...]
    phase: np.ndarray

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not np.isfinite(self.k_0) or not all(np.isfinite(c) for c in coeffs):
            raise ValueError("dispersion coefficients must be finite")
        if len(coeffs) + 1 > _MAX_DISPERSION_ORDER:
            raise ValueError(f"dispersion order must be <= {_MAX_DISPERSION_ORDER}")
        phase = np.asarray(self.phase, dtype=np.float64)
        if phase.ndim != 1 or not np.all(np.isfinite(phase)):
            raise ValueError("phase must be a finite 1-D vector")
        object.__setattr__(self, "k_0", float(self.k_0))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "phase", _readonly(phase))

    @property
    def order(self) -> int:
        return max(len(self.coeffs) + 1, 2)

    @property
    def a2(self) -> float:
        return self.coeffs[0] if self.coeffs else 0.0

    @property
    def a3(self) -> float:
        return self.coeffs[1] if len(self.coeffs) > 1 else 0.0

    @staticmethod
    def evaluate(k_grid, k_0, coeffs) -> np.ndarray:
        dk = np.asarray(k_grid, dtype=np.float64) - k_0
        phase = np.zeros_like(dk)
        for power, a in enumerate(coeffs, start=2):
            phase += a * dk**power
        return phase

    @classmethod
    def from_grid(cls, grid: GridSpec, k_0: float, coeffs=()) -> "DispersionModel":
        return cls(k_0, tuple(coeffs), cls.evaluate(grid.k_grid, k_0, coeffs))

    @classmethod
    def zero(cls, grid: GridSpec, k_0: float | None = None) -> "DispersionModel":
        return cls.from_grid(grid, grid.k_center if k_0 is None else k_0, ())

    def to_dict(self) -> dict[str, Any]:
        return {"k_0": self.k_0, "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d: dict[str, Any], grid: GridSpec) -> "DispersionModel":
        return cls.from_grid(grid, d["k_0"], d.get("coeffs", ()))


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Per-depth l1 weights, broadcast across A-scans."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("weights must be a 1-D vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "w", _readonly(w))

    def __len__(self):
        return self.w.size

    def to_dict(self) -> dict[str, Any]:
        return {"w": self.w.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "WeightVector":
        return cls(np.array(d["w"], dtype=np.float64))


def as_array(obj) -> np.ndarray:
    """The array inside a spectra or image container, or ``obj`` as an array."""
    if isinstance(obj, (RealSpectra, ComplexSpectra, SusceptibilityImage)):
        return obj.data
    return np.asarray(obj)
