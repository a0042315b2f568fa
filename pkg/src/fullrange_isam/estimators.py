"""scikit-learn style wrappers around the reconstruction methods.

Each reconstructor is a transformer from measured spectra to a full-range
image. ``fit`` validates the data, builds whatever the method precomputes for
that geometry (the NUFFT plan) and stores the reconstruction of the fitted
data as ``image_``; ``transform`` reconstructs any spectra on the same grid;
``inverse_transform`` maps an image back to the real spectra it predicts.

Images follow the package-wide scale convention: a component of physical
amplitude ``a`` appears with amplitude ``a / 2``, so the predicted spectra are
``2 Re(Khat eta)`` (or ``2 Re(F(eta) exp(1j phi))`` for the non-ISAM methods).

Examples
--------
>>> from fullrange_isam import make_grid, MbirReconstructor
>>> grid = make_grid(64, 128, 7.35, 8.35, 2.0, focal_z_index=96)
>>> est = MbirReconstructor(dispersion=(80.0,), weighted=True)   # doctest: +SKIP
>>> image = est.fit_transform(spectra)                           # doctest: +SKIP
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._fourier import axial_fft
from ._validation import check_dispersion, check_image, check_spectra
from .data_model import RealSpectra, SusceptibilityImage
from .defr import defr_image, defr_isam, defr_solve
from .dispersion import autofocus, compensated_image
from .isam import _khat_forward, ifft_reconstruct, isam_reconstruct, plan_nufft
from .mbir import MbirConfig, depth_weights, mbir_solve
from .metrics import rmse

__all__ = [
    "IfftReconstructor",
    "IsamReconstructor",
    "DefrReconstructor",
    "DefrIsamReconstructor",
    "MbirReconstructor",
    "DispersionAutofocus",
]


class _Reconstructor(TransformerMixin, BaseEstimator):
    uses_plan = False

    def fit(self, X, y=None):
        s = check_spectra(X, self.grid)
        self.grid_ = s.grid
        self.dispersion_ = check_dispersion(self.dispersion, s.grid)
        if self.uses_plan:
            self.plan_ = plan_nufft(
                s.grid, kernel_width=self.nufft_width, oversampling=self.nufft_oversample
            )
        self.image_ = self._reconstruct(s)
        return self

    def transform(self, X):
        check_is_fitted(self, "image_")
        return self._reconstruct(check_spectra(X, self.grid_))

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).image_

    def inverse_transform(self, eta):
        """Real spectra ``2 Re(Khat eta)`` predicted by an image."""
        check_is_fitted(self, "image_")
        eta = check_image(eta, self.grid_)
        if self.uses_plan:
            pred = _khat_forward(self.plan_, self.dispersion_.phase, eta.data)
        else:
            pred = axial_fft(eta.data) * np.exp(1j * self.dispersion_.phase)
        return RealSpectra(2.0 * np.real(pred), self.grid_)

    def score(self, X, y):
        """Negative RMSE of the reconstruction of ``X`` against the image ``y``."""
        return -rmse(self.transform(X), y)

    def _reconstruct(self, s: RealSpectra) -> SusceptibilityImage:
        raise NotImplementedError


class IfftReconstructor(_Reconstructor):
    """Dispersion-compensated axial IFFT per A-scan."""

    def __init__(self, dispersion=None, grid=None):
        self.dispersion = dispersion
        self.grid = grid

    def _reconstruct(self, s):
        return ifft_reconstruct(s, self.dispersion_)


class IsamReconstructor(_Reconstructor):
    """Full-range ISAM back-projection ``Khat^H s_d``."""

    uses_plan = True

    def __init__(self, dispersion=None, grid=None, nufft_width=6, nufft_oversample=2.0):
        self.dispersion = dispersion
        self.grid = grid
        self.nufft_width = nufft_width
        self.nufft_oversample = nufft_oversample

    def _reconstruct(self, s):
        return isam_reconstruct(s, self.plan_, self.dispersion_)


class DefrReconstructor(_Reconstructor):
    """Greedy DEFR; ``result_`` holds the components of the last reconstruction."""

    def __init__(self, dispersion=None, grid=None, max_iters=500, energy_floor=1e-4,
                 include_residual=True):
        self.dispersion = dispersion
        self.grid = grid
        self.max_iters = max_iters
        self.energy_floor = energy_floor
        self.include_residual = include_residual

    def _reconstruct(self, s):
        self.result_ = defr_solve(s, self.dispersion_, self.max_iters, self.energy_floor)
        return defr_image(self.result_, self.dispersion_, self.include_residual)


class DefrIsamReconstructor(_Reconstructor):
    """DEFR followed by ISAM back-projection of components and residual."""

    uses_plan = True

    def __init__(self, dispersion=None, grid=None, max_iters=500, energy_floor=1e-4,
                 nufft_width=6, nufft_oversample=2.0):
        self.dispersion = dispersion
        self.grid = grid
        self.max_iters = max_iters
        self.energy_floor = energy_floor
        self.nufft_width = nufft_width
        self.nufft_oversample = nufft_oversample

    def _reconstruct(self, s):
        self.result_ = defr_solve(s, self.dispersion_, self.max_iters, self.energy_floor)
        return defr_isam(s, self.dispersion_, self.plan_, result=self.result_)


class MbirReconstructor(_Reconstructor):
    """FISTA model-based reconstruction.

    ``weighted=False`` is plain MBIR (uniform weights); ``weighted=True`` is
    MBIR+ with weights rising linearly from ``w_min`` at zero delay to
    ``w_max`` at the deepest pixel. ``trace_`` holds the last solver trace.
    """

    uses_plan = True

    def __init__(self, dispersion=None, grid=None, lam=0.5, weighted=False, w_min=0.5,
                 w_max=1.0, tol=1e-3, max_iters=500, add_residual=True, step_scale=1.0,
                 normalize="operator", output="backprojected", nufft_width=6,
                 nufft_oversample=2.0):
        self.dispersion = dispersion
        self.grid = grid
        self.lam = lam
        self.weighted = weighted
        self.w_min = w_min
        self.w_max = w_max
        self.tol = tol
        self.max_iters = max_iters
        self.add_residual = add_residual
        self.step_scale = step_scale
        self.normalize = normalize
        self.output = output
        self.nufft_width = nufft_width
        self.nufft_oversample = nufft_oversample

    def config(self, grid) -> MbirConfig:
        weights = depth_weights(grid, self.w_min, self.w_max) if self.weighted else None
        return MbirConfig(
            lam=self.lam, weights=weights, tol=self.tol, max_iters=self.max_iters,
            add_residual=self.add_residual, step_scale=self.step_scale,
            normalize=self.normalize, output=self.output,
        )

    def _reconstruct(self, s):
        image, self.trace_ = mbir_solve(s, self.plan_, self.dispersion_, self.config(s.grid))
        return image


class DispersionAutofocus(TransformerMixin, BaseEstimator):
    """Entropy autofocus for ``a_2`` (and optionally ``a_3``).

    After ``fit``, ``dispersion_`` is the estimated model and ``result_`` the
    full :class:`~fullrange_isam.dispersion.AutofocusResult`; ``transform``
    returns the compensated IFFT image under that model.
    """

    def __init__(self, k_0=None, a2_range=(0.0, 200.0), a3_range=(0.0, 0.0), grid_points=21,
                 refine_iters=200, grid=None):
        self.k_0 = k_0
        self.a2_range = a2_range
        self.a3_range = a3_range
        self.grid_points = grid_points
        self.refine_iters = refine_iters
        self.grid = grid

    def fit(self, X, y=None):
        s = check_spectra(X, self.grid)
        k_0 = s.grid.k_center if self.k_0 is None else self.k_0
        self.result_ = autofocus(s, k_0, self.a2_range, self.a3_range, self.grid_points,
                                 self.refine_iters)
        self.dispersion_ = self.result_.dispersion
        self.grid_ = s.grid
        return self

    def transform(self, X):
        check_is_fitted(self, "dispersion_")
        s = check_spectra(X, self.grid_)
        return SusceptibilityImage(compensated_image(s.data, self.dispersion_.phase), s.grid)
