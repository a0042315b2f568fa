"""ISAM forward model and its adjoint via NUFFT resampling on the Stolt map.

For transverse frequency ``q`` and wavenumber ``k`` the measured spectrum
samples the object's axial spectrum at ``beta = -sqrt(4k^2 - q^2)``. After a
transverse FFT each ``q`` line needs that axial spectrum at ``n_z``
nonuniform points, which is a 1-D type-2 NUFFT per line.

Phase conventions
-----------------
Images are stored demodulated so that, at ``q = 0``, the operator reduces
exactly to the unitary axial FFT of :mod:`fullrange_isam._fourier`. With
``nu = (sqrt(4k^2 - q^2) - 2 k_min) / (2 dk)`` the operator on one ``q``
line is::

    K[q, m] = n_z**-0.5 * exp(-2j pi m (f - c) / n_z)
              * sum_i eta_hat[q, i] * exp(-2j pi nu[q, m] (i - f) / n_z)

with ``c`` the zero-delay index and ``f`` the focal index. An in-focus
scatterer at positive delay therefore reconstructs at positive delay.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._fourier import axial_ifft, lateral_fft, lateral_ifft
from .data_model import (
    SPACE_XK,
    ComplexSpectra,
    DispersionModel,
    GridSpec,
    RealSpectra,
    SusceptibilityImage,
    as_array,
)
from .nufft import interpolation_matrix, kb_beta, kb_fourier, spmv_complex

__all__ = [
    "NufftPlan",
    "stolt_beta",
    "plan_nufft",
    "k_forward",
    "k_adjoint",
    "khat_forward",
    "khat_adjoint",
    "isam_reconstruct",
    "ifft_reconstruct",
]

MIN_OVERSAMPLING = 1.25


def stolt_beta(q_x, k):
    """Axial spatial frequency ``-sqrt(4k^2 - q_x^2)`` in rad/um."""
    q_x = np.asarray(q_x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    arg = 4.0 * k**2 - q_x**2
    if np.any(arg < 0):
        raise ValueError("evanescent input: 4k^2 < q_x^2")
    beta = -np.sqrt(arg)
    return beta if beta.ndim else float(beta)


@dataclass(frozen=True, eq=False)
class NufftPlan:
    """Precomputed Stolt resampling for one grid.

    Attributes
    ----------
    beta_targets : ndarray (n_x, n_z)
        Stolt ordinates ``beta(q_x[p], k[m])`` in rad/um.
    nu : ndarray (n_x, n_z)
        The same ordinates in axial DFT-bin units (``nu == m`` when ``q = 0``).
    opnorm : float
        Power-iteration estimate of the spectral norm of ``K``; a lower bound
        that typically sits within half a percent of the true value.
    """

    grid: GridSpec
    kernel_width: int
    oversampling: float
    kb_beta: float
    grid_len: int
    beta_targets: np.ndarray
    nu: np.ndarray
    interp: sp.csr_matrix
    interp_t: sp.csr_matrix
    pad_index: np.ndarray
    deapod: np.ndarray
    out_phase: np.ndarray
    opnorm: float
    # Lens/intensity filter of the full ISAM model. None means unfiltered.
    spectral_filter: np.ndarray | None = None

    @property
    def shape(self):
        return self.grid.shape


def plan_nufft(
    grid: GridSpec,
    kernel_width: int = 6,
    oversampling: float = 2.0,
    power_iters: int = 50,
    seed: int = 0,
) -> NufftPlan:
    """Precompute the interpolation matrix, roll-off correction and norm estimate.

    Raises
    ------
    ValueError
        If oversampling is below 1.25, the kernel width is not a positive
        integer, or any ``q_x`` reaches the evanescent cutoff ``|q_x| >= 2 k_min``.
    """
    if oversampling < MIN_OVERSAMPLING:
        raise ValueError(
            f"oversampling must be >= {MIN_OVERSAMPLING}, got {oversampling}"
        )
    if int(kernel_width) != kernel_width or kernel_width < 2:
        raise ValueError("kernel_width must be an integer >= 2")
    kernel_width = int(kernel_width)
    n_x, n_z = grid.shape
    q_x = grid.q_x
    worst = np.argmax(np.abs(q_x))
    if 4 * grid.k_min**2 <= q_x[worst] ** 2:
        raise ValueError(
            f"evanescent cutoff reached: q_x={q_x[worst]:.6g} rad/um with "
            f"k_min={grid.k_min:.6g} rad/um"
        )
    beta_targets = stolt_beta(q_x[:, None], grid.k_grid[None, :])
    nu = (-beta_targets - 2.0 * grid.k_min) / (2.0 * grid.dk)

    grid_len = int(np.ceil(oversampling * n_z))
    grid_len += grid_len % 2
    ratio = grid_len / n_z
    shape_param = kb_beta(kernel_width, ratio)
    interp = interpolation_matrix(nu * ratio, grid_len, kernel_width, shape_param)

    c = grid.zero_delay_index
    f = grid.focal_z_index
    positions = np.arange(n_z) - c
    deapod = 1.0 / kb_fourier(positions / grid_len, kernel_width, shape_param)
    m = np.arange(n_z)[None, :]
    out_phase = np.exp(-2j * np.pi * (nu - m) * (c - f) / n_z) / np.sqrt(n_z)

    plan = NufftPlan(
        grid=grid,
        kernel_width=kernel_width,
        oversampling=float(oversampling),
        kb_beta=float(shape_param),
        grid_len=grid_len,
        beta_targets=beta_targets,
        nu=nu,
        interp=interp,
        interp_t=interp.T.tocsr(),
        pad_index=np.mod(positions, grid_len),
        deapod=deapod,
        out_phase=out_phase,
        opnorm=np.nan,
    )
    object.__setattr__(plan, "opnorm", _power_norm(plan, power_iters, seed))
    for arr in (beta_targets, nu, deapod, out_phase):
        arr.setflags(write=False)
    return plan


def _power_norm(plan: NufftPlan, n_iter: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(plan.shape) + 1j * rng.standard_normal(plan.shape)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(n_iter):
        w = _adjoint(plan, _forward(plan, v))
        estimate = np.sqrt(np.real(np.vdot(v, w)))
        v = w / np.linalg.norm(w)
    return float(estimate)


def _forward(plan: NufftPlan, eta: np.ndarray) -> np.ndarray:
    n_x, n_z = plan.shape
    u = lateral_fft(eta) * plan.deapod
    padded = np.zeros((n_x, plan.grid_len), dtype=np.complex128)
    padded[:, plan.pad_index] = u
    spectrum = np.fft.fft(padded, axis=1)
    g = spmv_complex(plan.interp, spectrum).reshape(n_x, n_z) * plan.out_phase
    if plan.spectral_filter is not None:
        g *= plan.spectral_filter
    return lateral_ifft(g)


def _adjoint(plan: NufftPlan, s: np.ndarray) -> np.ndarray:
    n_x = plan.shape[0]
    g = lateral_fft(s)
    if plan.spectral_filter is not None:
        g *= np.conj(plan.spectral_filter)
    g *= np.conj(plan.out_phase)
    spread = spmv_complex(plan.interp_t, g).reshape(n_x, plan.grid_len)
    padded = np.fft.ifft(spread, axis=1, norm="forward")
    return lateral_ifft(padded[:, plan.pad_index] * plan.deapod)


def _khat_forward(plan, phase, eta):
    return _forward(plan, eta) * np.exp(1j * phase)


def _khat_adjoint(plan, phase, s):
    return _adjoint(plan, s * np.exp(-1j * phase))


def _data(obj, grid: GridSpec, what: str) -> np.ndarray:
    arr = as_array(obj)
    if arr.shape != grid.shape:
        raise ValueError(f"{what} has shape {arr.shape}, plan expects {grid.shape}")
    return arr


def k_forward(eta: SusceptibilityImage, plan: NufftPlan) -> ComplexSpectra:
    """Complex interferometric spectra ``K eta`` in x-k space."""
    arr = _data(eta, plan.grid, "image")
    return ComplexSpectra(_forward(plan, arr), plan.grid, SPACE_XK)


def k_adjoint(s: ComplexSpectra, plan: NufftPlan) -> SusceptibilityImage:
    """Back-projection ``K^H s``."""
    arr = _data(s, plan.grid, "spectra")
    return SusceptibilityImage(_adjoint(plan, arr), plan.grid)


def khat_forward(eta, plan: NufftPlan, d: DispersionModel) -> ComplexSpectra:
    """Dispersed forward model ``diag(exp(1j phi)) K eta``."""
    arr = _data(eta, plan.grid, "image")
    return ComplexSpectra(_khat_forward(plan, d.phase, arr), plan.grid, SPACE_XK)


def khat_adjoint(s, plan: NufftPlan, d: DispersionModel) -> SusceptibilityImage:
    arr = _data(s, plan.grid, "spectra")
    return SusceptibilityImage(_khat_adjoint(plan, d.phase, arr), plan.grid)


def isam_reconstruct(s_d: RealSpectra, plan: NufftPlan, d: DispersionModel) -> SusceptibilityImage:
    """Dispersion-compensated full-range ISAM (no half-range crop)."""
    arr = _data(s_d, plan.grid, "spectra")
    return SusceptibilityImage(_khat_adjoint(plan, d.phase, arr.astype(np.complex128)), plan.grid)


def ifft_reconstruct(s_d: RealSpectra, d: DispersionModel) -> SusceptibilityImage:
    """Per-A-scan axial IFFT after dispersion compensation."""
    return SusceptibilityImage(axial_ifft(s_d.data * np.exp(-1j * d.phase)), s_d.grid)
