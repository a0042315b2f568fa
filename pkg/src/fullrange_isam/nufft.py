"""Kaiser-Bessel gridding for batched 1-D type-2 NUFFTs.

Only the pieces the Stolt resampling needs live here: the kernel, its
continuous Fourier transform (for roll-off correction) and the sparse
interpolation matrix from an oversampled uniform grid to nonuniform targets.
The spreading step of the adjoint is the transpose of the same matrix, which
keeps the forward/adjoint pair exact to rounding.
"""
import numpy as np
import scipy.sparse as sp
from scipy.special import i0

__all__ = ["kb_beta", "kb_kernel", "kb_fourier", "interpolation_matrix"]


def kb_beta(width, oversampling):
    """Kaiser-Bessel shape parameter for a given kernel width and oversampling.

    Beatty, Nishimura & Pauly, IEEE TMI 24(6), 2005, eq. 5.
    """
    return np.pi * np.sqrt((width / oversampling) ** 2 * (oversampling - 0.5) ** 2 - 0.8)


def kb_kernel(t, width, beta):
    """``I0(beta * sqrt(1 - (2t/W)^2))`` on ``|t| <= W/2``, zero outside."""
    t = np.asarray(t, dtype=np.float64)
    arg = 1.0 - (2.0 * t / width) ** 2
    out = np.zeros_like(t)
    inside = arg >= 0
    out[inside] = i0(beta * np.sqrt(arg[inside]))
    return out


def kb_fourier(xi, width, beta):
    r"""Continuous Fourier transform of :func:`kb_kernel` at frequency ``xi``.

    .. math::
        \hat\psi(\xi) = W \frac{\sinh\sqrt{\beta^2 - (\pi W \xi)^2}}
                               {\sqrt{\beta^2 - (\pi W \xi)^2}}
    """
    xi = np.asarray(xi, dtype=np.float64)
    r = beta**2 - (np.pi * width * xi) ** 2
    out = np.full_like(xi, float(width))
    pos = r > 0
    neg = r < 0
    out[pos] = width * np.sinh(np.sqrt(r[pos])) / np.sqrt(r[pos])
    out[neg] = width * np.sin(np.sqrt(-r[neg])) / np.sqrt(-r[neg])
    return out


def interpolation_matrix(targets, grid_len, width, beta):
    """Sparse matrix evaluating ``sum_l U[l] psi(mu - l)`` at every target.

    Parameters
    ----------
    targets : ndarray, shape (n_lines, n_out)
        Target coordinates in units of the oversampled grid spacing. Each line
        interpolates only from its own row of the oversampled grid; indices
        wrap modulo ``grid_len``.
    grid_len : int
        Oversampled grid length ``M``.
    width : int
        Number of kernel taps.
    beta : float
        Kaiser-Bessel shape parameter.

    Returns
    -------
    scipy.sparse.csr_matrix, shape (n_lines * n_out, n_lines * grid_len)
    """
    targets = np.asarray(targets, dtype=np.float64)
    n_lines, n_out = targets.shape
    first = np.ceil(targets - width / 2.0).astype(np.int64)
    taps = first[..., None] + np.arange(width)
    weights = kb_kernel(targets[..., None] - taps, width, beta)
    cols = np.mod(taps, grid_len) + (np.arange(n_lines) * grid_len)[:, None, None]
    rows = np.broadcast_to(np.arange(n_lines * n_out).reshape(n_lines, n_out, 1), taps.shape)
    mat = sp.coo_matrix(
        (weights.ravel(), (rows.ravel(), cols.ravel())),
        shape=(n_lines * n_out, n_lines * grid_len),
    )
    return mat.tocsr()


def spmv_complex(mat, vec):
    """Real sparse matrix times complex vector without upcasting the matrix."""
    pairs = np.ascontiguousarray(vec, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    out = np.ascontiguousarray(mat @ pairs)
    return out.view(np.complex128).ravel()
