"""Input coercion shared by the estimator wrappers and the CLI."""
from __future__ import annotations

import numpy as np

from .data_model import DispersionModel, GridSpec, RealSpectra, SusceptibilityImage


def check_grid(grid) -> GridSpec:
    if isinstance(grid, GridSpec):
        return grid
    if isinstance(grid, dict):
        return GridSpec.from_dict(grid)
    raise TypeError(f"expected a GridSpec, got {type(grid).__name__}")


def check_spectra(X, grid=None) -> RealSpectra:
    """Return ``X`` as :class:`RealSpectra`.

    Plain arrays need ``grid``; containers must agree with it when both are given.
    """
    if isinstance(X, RealSpectra):
        if grid is not None and check_grid(grid) != X.grid:
            raise ValueError("spectra grid does not match the estimator grid")
        return X
    if grid is None:
        raise ValueError("a GridSpec is required to interpret a plain array")
    arr = np.asarray(X)
    if np.iscomplexobj(arr):
        raise ValueError("measured spectra must be real")
    return RealSpectra(arr.astype(np.float64, copy=False), check_grid(grid))


def check_image(eta, grid=None) -> SusceptibilityImage:
    if isinstance(eta, SusceptibilityImage):
        if grid is not None and check_grid(grid) != eta.grid:
            raise ValueError("image grid does not match the estimator grid")
        return eta
    if grid is None:
        raise ValueError("a GridSpec is required to interpret a plain array")
    return SusceptibilityImage(np.asarray(eta, dtype=np.complex128), check_grid(grid))


def check_dispersion(dispersion, grid: GridSpec) -> DispersionModel:
    """Accept ``None`` (no dispersion), a model, a mapping or a coefficient tuple."""
    if dispersion is None:
        return DispersionModel.zero(grid)
    if isinstance(dispersion, DispersionModel):
        model = dispersion
    elif isinstance(dispersion, dict):
        model = DispersionModel.from_dict(dispersion, grid)
    else:
        model = DispersionModel.from_grid(grid, grid.k_center, tuple(dispersion))
    if model.phase.shape != (grid.n_z,):
        raise ValueError("dispersion phase length does not match the grid")
    # re-sample so a model built on another grid with the same k_0 still applies
    return DispersionModel.from_grid(grid, model.k_0, model.coeffs)


def check_positive(name, value, allow_zero=False):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be finite and {bound}, got {value}")
    return value
