"""Dispersion phase polynomial: application, real-valued encoding and autofocus."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._fourier import axial_ifft
from .data_model import (
    SPACE_XK,
    ComplexSpectra,
    DispersionModel,
    GridSpec,
    RealSpectra,
)

__all__ = [
    "dispersion_phase",
    "apply_phase",
    "encode_real",
    "compensated_image",
    "image_entropy",
    "autofocus",
    "AutofocusResult",
]

logger = logging.getLogger(__name__)


def dispersion_phase(grid: GridSpec, k_0: float, coeffs) -> DispersionModel:
    """Sample ``sum_i a_i (k - k_0)**i`` (i >= 2) on the grid wavenumbers.

    Parameters
    ----------
    grid : GridSpec
    k_0 : float
        Expansion wavenumber in rad/um.
    coeffs : sequence of float
        ``a_2, a_3, ...`` in rad um**i.
    """
    coeffs = tuple(float(c) for c in coeffs)
    if not all(np.isfinite(c) for c in coeffs) or not np.isfinite(k_0):
        raise ValueError("dispersion coefficients must be finite")
    return DispersionModel.from_grid(grid, k_0, coeffs)


def _check_phase(d: DispersionModel, n_z: int) -> None:
    if d.phase.shape != (n_z,):
        raise ValueError(
            f"dispersion phase has length {d.phase.size}, spectra have {n_z} samples"
        )


def apply_phase(sc: ComplexSpectra, d: DispersionModel, sign: int = 1) -> ComplexSpectra:
    """Multiply every A-scan by ``exp(sign * 1j * phase)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if sc.space != SPACE_XK:
        raise ValueError("apply_phase expects x-k spectra")
    _check_phase(d, sc.grid.n_z)
    return ComplexSpectra(sc.data * np.exp(sign * 1j * d.phase), sc.grid, SPACE_XK)


def encode_real(sc: ComplexSpectra, d: DispersionModel) -> RealSpectra:
    """Real spectrometer signal ``Re(sc * exp(1j * phase))``."""
    if sc.space != SPACE_XK:
        raise ValueError("encode_real expects x-k spectra")
    _check_phase(d, sc.grid.n_z)
    return RealSpectra(np.real(sc.data * np.exp(1j * d.phase)), sc.grid)


def compensated_image(s_d, phase) -> np.ndarray:
    """Axial IFFT of dispersion-compensated real spectra (array level)."""
    return axial_ifft(np.asarray(s_d) * np.exp(-1j * np.asarray(phase)))


def image_entropy(image) -> float:
    """Shannon entropy of the normalized intensity; lower means sharper."""
    intensity = np.abs(image) ** 2
    total = intensity.sum()
    if total == 0:
        return 0.0
    p = intensity[intensity > 0] / total
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class AutofocusResult:
    """Outcome of :func:`autofocus`.

    ``converged`` is False when the simplex refinement ran out of iterations or
    the optimum sits on the boundary of the search box.
    """

    dispersion: DispersionModel
    cost: float
    converged: bool
    at_boundary: bool
    iterations: int
    grid_a2: np.ndarray
    grid_a3: np.ndarray
    grid_costs: np.ndarray


def autofocus(
    s_d: RealSpectra,
    k_0: float,
    a2_range=(0.0, 200.0),
    a3_range=(0.0, 0.0),
    grid_points: int = 21,
    refine_iters: int = 200,
    rtol: float = 1e-6,
) -> AutofocusResult:
    """Estimate ``a_2`` and ``a_3`` by minimizing image entropy.

    A coarse ``grid_points x grid_points`` search over the given ranges seeds
    a bounded Nelder-Mead refinement. A degenerate range (``lo == hi``) pins
    that coefficient.

    The cost is symmetric under ``a -> -a`` for full-range data (the mirror
    term swaps roles with the object), so the search ranges must fix the sign.
    """
    grid = s_d.grid
    data = s_d.data
    k_grid = grid.k_grid
    ranges = []
    for lo, hi in (a2_range, a3_range):
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise ValueError(f"invalid search range ({lo}, {hi})")
        ranges.append((lo, hi))
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    free = [hi > lo for lo, hi in ranges]
    if not any(free):
        raise ValueError("at least one search range must be non-degenerate")

    def coeffs_of(u):
        return tuple(lo + ui * (hi - lo) for (lo, hi), ui in zip(ranges, u))

    def cost(u):
        phase = DispersionModel.evaluate(k_grid, k_0, coeffs_of(u))
        return image_entropy(compensated_image(data, phase))

    ticks = np.linspace(0.0, 1.0, grid_points)
    axes = [ticks if f else np.zeros(1) for f in free]
    grid_costs = np.empty((axes[0].size, axes[1].size))
    for (i, u2), (j, u3) in itertools.product(enumerate(axes[0]), enumerate(axes[1])):
        grid_costs[i, j] = cost((u2, u3))
    i, j = np.unravel_index(np.argmin(grid_costs), grid_costs.shape)
    start = np.array([axes[0][i], axes[1][j]])
    best = grid_costs[i, j]

    free_idx = [n for n, f in enumerate(free) if f]

    def reduced_cost(v):
        u = start.copy()
        u[free_idx] = np.clip(v, 0.0, 1.0)
        return cost(u)

    res = minimize(
        reduced_cost,
        start[free_idx],
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(free_idx),
        options={
            "maxiter": refine_iters,
            "xatol": rtol,
            "fatol": rtol * max(abs(best), np.finfo(float).tiny),
            "initial_simplex": _initial_simplex(start[free_idx], 0.5 / (grid_points - 1)),
        },
    )
    u_opt = start.copy()
    if res.fun <= best:
        u_opt[free_idx] = np.clip(res.x, 0.0, 1.0)
        best = float(res.fun)
    at_boundary = bool(np.any((u_opt[free_idx] <= 1e-6) | (u_opt[free_idx] >= 1 - 1e-6)))
    converged = bool(res.success) and not at_boundary
    if not converged:
        logger.warning(
            "autofocus did not converge (boundary=%s, nit=%d)", at_boundary, res.nit
        )
    coeffs = coeffs_of(u_opt)
    return AutofocusResult(
        dispersion=dispersion_phase(grid, k_0, coeffs),
        cost=best,
        converged=converged,
        at_boundary=at_boundary,
        iterations=int(res.nit),
        grid_a2=ranges[0][0] + axes[0] * (ranges[0][1] - ranges[0][0]),
        grid_a3=ranges[1][0] + axes[1] * (ranges[1][1] - ranges[1][0]),
        grid_costs=grid_costs,
    )


def _initial_simplex(x0, step):
    simplex = [np.array(x0, dtype=float)]
    for n in range(len(x0)):
        vertex = simplex[0].copy()
        # step inward so the simplex stays inside the unit box
        vertex[n] += step if vertex[n] + step <= 1.0 else -step
        simplex.append(vertex)
    return np.array(simplex)
