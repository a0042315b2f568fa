"""Image-quality metrics: complex RMSE, and PSNR/SSIM on 16-bit log images."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import correlate2d

from .data_model import as_array as _arr

__all__ = [
    "EvalReport",
    "rmse",
    "log_scale_16bit",
    "psnr",
    "ssim",
    "evaluate",
    "lateral_fwhm",
    "PSNR_CAP_DB",
]

PSNR_CAP_DB = 120.0
_PEAK = 65535.0


def rmse(a, b) -> float:
    """Root mean squared error over all pixels of two complex images."""
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean(np.abs(a - b) ** 2)))


def log_scale_16bit(img, floor_db: float = -60.0, ceil_db: float = 0.0, reference=None) -> np.ndarray:
    """Map ``20 log10(|img| / ref)`` from ``[floor_db, ceil_db]`` onto ``[0, 65535]``.

    ``ref`` is ``max|img|`` unless ``reference`` gives it explicitly (a scalar
    or an image whose maximum is used), which lets several reconstructions
    share one display scaling.
    """
    mag = np.abs(_arr(img))
    if reference is None:
        ref = mag.max()
    elif np.ndim(_arr(reference)) == 0:
        ref = float(_arr(reference))
    else:
        ref = np.abs(_arr(reference)).max()
    if ref <= 0:
        raise ValueError("cannot log-scale an all-zero image")
    if not floor_db < ceil_db:
        raise ValueError("floor_db must be below ceil_db")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / ref)
    db = np.clip(db, floor_db, ceil_db)
    return np.rint((db - floor_db) / (ceil_db - floor_db) * _PEAK).astype(np.uint16)


def psnr(a16, b16) -> float:
    a = np.asarray(a16, dtype=np.float64)
    b = np.asarray(b16, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(_PEAK**2 / mse), PSNR_CAP_DB))


def _gaussian_window(size=11, sigma=1.5):
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a16, b16, window_size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over all fully contained Gaussian windows (Wang et al. 2004)."""
    a = np.asarray(a16, dtype=np.float64)
    b = np.asarray(b16, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < window_size:
        raise ValueError(f"images must be at least {window_size} pixels per side")
    win = _gaussian_window(window_size, sigma)
    c1 = (0.01 * _PEAK) ** 2
    c2 = (0.03 * _PEAK) ** 2

    def filt(x):
        return correlate2d(x, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class EvalReport:
    method: str
    rmse: float
    psnr: float
    ssim: float
    floor_db: float
    ceil_db: float
    reference_max: float

    def as_row(self):
        return asdict(self)


def evaluate(recon, truth, method: str = "", floor_db: float = -60.0, ceil_db: float = 0.0,
             reference=None) -> EvalReport:
    """Score one reconstruction.

    Both images are log-scaled against one peak: that of ``reference`` (an
    image or a scalar) if given, otherwise the truth's.
    """
    if reference is None:
        reference = truth
    ref_arr = _arr(reference)
    ref = float(ref_arr) if np.ndim(ref_arr) == 0 else float(np.abs(ref_arr).max())
    a16 = log_scale_16bit(truth, floor_db, ceil_db, reference=ref)
    b16 = log_scale_16bit(recon, floor_db, ceil_db, reference=ref)
    return EvalReport(
        method=method,
        rmse=rmse(recon, truth),
        psnr=psnr(a16, b16),
        ssim=ssim(a16, b16),
        floor_db=floor_db,
        ceil_db=ceil_db,
        reference_max=ref,
    )


def lateral_fwhm(img, depth_window: int = 0) -> float:
    """Lateral full width at half maximum (pixels) of the brightest feature.

    The profile is the maximum of ``|img|`` over ``depth_window`` pixels on
    either side of the peak's depth. Crossings are linearly interpolated and
    the lateral axis is treated as periodic.
    """
    mag = np.abs(_arr(img))
    ix, iz = np.unravel_index(np.argmax(mag), mag.shape)
    lo, hi = max(iz - depth_window, 0), min(iz + depth_window + 1, mag.shape[1])
    profile = np.roll(mag[:, lo:hi].max(axis=1), mag.shape[0] // 2 - ix)
    centre = mag.shape[0] // 2
    half = profile[centre] / 2.0

    def crossing(direction):
        i = centre
        while 0 <= i + direction < profile.size and profile[i + direction] >= half:
            i += direction
        j = i + direction
        if not 0 <= j < profile.size:
            return float(i)
        frac = (profile[i] - half) / (profile[i] - profile[j])
        return i + direction * frac

    return float(crossing(1) - crossing(-1))
