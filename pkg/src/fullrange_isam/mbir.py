"""Model-based iterative reconstruction with FISTA.

Minimizes ``0.5 * ||Re(Khat eta) - s_d||^2 + lam * sum_i w_i |eta_i|`` where
``Khat = diag(exp(1j phi)) K``. The gradient step uses ``step_scale / L**2``
with ``L`` the plan's operator-norm estimate, so the step is valid regardless
of FFT normalization.

Data scale
----------
``lam`` is only meaningful relative to the data scale. By default the spectra
are rescaled to a peak magnitude of ``sqrt(n_x * n_z)``: unit peak in the units
of an operator built from unnormalized DFTs, whose squared norm is the pixel
count. This keeps the customary ``lam`` range (roughly 0.1 to 0.8) a mild,
scale-free prior. ``normalize="unit"`` rescales to unit peak instead (a much
stronger prior for the same ``lam``) and ``normalize="none"`` solves on the raw
data. The returned image is always on the scale of the input.

Output image
------------
The iterate solves the data model ``Re(Khat eta) = s_d`` and is therefore on
the physical scale, while back-projection methods (IFFT, ISAM, DEFR) see each
component at half that magnitude because taking the real part splits it
between object and mirror. With ``output="backprojected"`` (default) the image
is ``image_scale * K^H K z + Khat^H (s_d - Re(Khat z))``: the back-projection
of the estimated analytic spectrum, formed exactly like an ISAM image, plus the
back-projected misfit. ``output="iterate"`` uses ``image_scale * z`` in place
of the first term; with ``image_scale=1`` that is the plain
``z + Khat^H (s_d - Re(Khat z))``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data_model import DispersionModel, GridSpec, RealSpectra, SusceptibilityImage, WeightVector, as_array
from .isam import NufftPlan, _khat_adjoint, _khat_forward

__all__ = [
    "MbirConfig",
    "MbirTrace",
    "NonFiniteIterateError",
    "soft_threshold",
    "depth_weights",
    "relative_residual",
    "objective",
    "mbir_solve",
    "data_scale",
]


class NonFiniteIterateError(FloatingPointError):
    """Raised when an MBIR iterate stops being finite."""

    def __init__(self, iteration):
        super().__init__(f"non-finite MBIR iterate at iteration {iteration}")
        self.iteration = iteration


def soft_threshold(u, t):
    """Complex soft-thresholding ``u * max(|u|-t, 0) / (max(|u|-t, 0) + t)``.

    Shrinks magnitudes by ``t`` and keeps the phase; this is the proximal map
    of ``t * |x|``. ``t`` broadcasts against ``u``.
    """
    u = np.asarray(u)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    shrink = np.maximum(np.abs(u) - t, 0.0)
    denom = shrink + t
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, u * shrink / np.where(denom > 0, denom, 1.0), 0.0)
    return out if out.ndim else out[()]


def depth_weights(grid: GridSpec, w_min: float = 0.5, w_max: float = 1.0) -> WeightVector:
    """Weights rising linearly with distance from zero delay.

    ``w_min`` at zero delay, ``w_max`` at the deepest pixel (index 0, which
    lies ``n_z / 2`` pixels from zero delay); symmetric in the two half-spaces.
    """
    if not 0 <= w_min <= w_max:
        raise ValueError(f"need 0 <= w_min <= w_max, got {w_min}, {w_max}")
    c = grid.zero_delay_index
    distance = np.abs(np.arange(grid.n_z) - c) / c
    return WeightVector(w_min + (w_max - w_min) * distance)


def relative_residual(z_k, eta_k, g_k, epsilon: float = 1e-12) -> float:
    """Fixed-point gap ``||z-eta|| / (max(||g||, ||z-eta+g||) + eps)``."""
    diff = np.asarray(z_k) - np.asarray(eta_k)
    g_k = np.asarray(g_k)
    num = np.linalg.norm(diff)
    denom = max(np.linalg.norm(g_k), np.linalg.norm(diff + g_k)) + epsilon
    return float(num / denom)


def _weights_array(weights, n_z):
    if weights is None:
        return np.ones(n_z)
    w = weights.w if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if w.shape != (n_z,):
        raise ValueError(f"weights must have length {n_z}")
    return w


def objective(eta, s_d, plan: NufftPlan, d: DispersionModel, lam: float, w=None) -> float:
    """``0.5 ||Re(Khat eta) - s_d||^2 + lam * sum w |eta|`` on the given scale."""
    eta = as_array(eta)
    s = as_array(s_d)
    w = _weights_array(w, plan.grid.n_z)
    fit = np.real(_khat_forward(plan, d.phase, eta)) - s
    return float(0.5 * np.sum(fit**2) + lam * np.sum(w * np.abs(eta)))


# Power iteration approaches ||K|| from below; inflating the estimate keeps
# the step within the 1/L^2 bound FISTA needs.
NORM_MARGIN = 1.02

NORMALIZATIONS = ("operator", "unit", "none")
OUTPUTS = ("backprojected", "iterate")


def data_scale(s_d, normalize: str = "operator") -> float:
    """Factor the solver divides the spectra by before iterating."""
    s = as_array(s_d)
    if normalize == "none":
        return 1.0
    peak = float(np.max(np.abs(s))) if s.size else 0.0
    if peak == 0.0:
        return 1.0
    if normalize == "unit":
        return peak
    if normalize == "operator":
        return peak / np.sqrt(s.size)
    raise ValueError(f"normalize must be one of {NORMALIZATIONS}")


@dataclass(frozen=True)
class MbirConfig:
    """Solver settings.

    ``residual_from`` selects the iterate whose misfit is back-projected when
    ``add_residual`` is on: ``"z"`` (thresholded iterate, default) or
    ``"eta"`` (the extrapolated point it was computed from).
    """

    lam: float = 0.5
    weights: WeightVector | None = None
    tol: float = 1e-3
    max_iters: int = 500
    add_residual: bool = True
    step_scale: float = 1.0
    epsilon: float = 1e-12
    normalize: str = "operator"
    residual_from: str = "z"
    image_scale: float = 0.5
    output: str = "backprojected"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if not 0 < self.step_scale <= 1:
            raise ValueError("step_scale must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.residual_from not in ("z", "eta"):
            raise ValueError("residual_from must be 'z' or 'eta'")
        if self.image_scale <= 0:
            raise ValueError("image_scale must be positive")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}")
        if self.output not in OUTPUTS:
            raise ValueError(f"output must be one of {OUTPUTS}")


@dataclass
class MbirTrace:
    """Per-iteration diagnostics, on the normalized problem the solver sees.

    ``data_scale`` is the factor the measurement was divided by; the returned
    image has been multiplied back by it.
    """

    objective: list = field(default_factory=list)
    fidelity: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    rel_residual: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = False
    data_scale: float = 1.0
    step: float = 0.0
    final_iterate: np.ndarray | None = None
    residual_norm: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.objective)

    def rows(self):
        for n, row in enumerate(zip(self.objective, self.fidelity, self.l1,
                                    self.rel_residual, self.seconds), start=1):
            yield (n, *row)


def mbir_solve(
    s_d: RealSpectra,
    plan: NufftPlan,
    d: DispersionModel,
    cfg: MbirConfig = MbirConfig(),
) -> tuple[SusceptibilityImage, MbirTrace]:
    """Run FISTA from zero and return the image and its trace.

    Raises
    ------
    NonFiniteIterateError
        If an iterate or objective value becomes non-finite.
    """
    grid = plan.grid
    s = np.asarray(s_d.data, dtype=np.float64)
    if s.shape != grid.shape:
        raise ValueError(f"spectra shape {s.shape} does not match plan {grid.shape}")
    phase = d.phase
    w = _weights_array(cfg.weights, grid.n_z)

    scale = data_scale(s, cfg.normalize)
    s = s / scale
    step = cfg.step_scale / (NORM_MARGIN * plan.opnorm) ** 2
    thresh = (cfg.lam * step) * w[None, :]
    trace = MbirTrace(data_scale=scale, step=step)

    eta = np.zeros(grid.shape, dtype=np.complex128)
    k_eta = np.zeros(grid.shape, dtype=np.complex128)
    z_prev = eta
    k_z_prev = k_eta
    t = 1.0
    start = time.perf_counter()
    for k in range(1, cfg.max_iters + 1):
        g = step * _khat_adjoint(plan, phase, np.real(k_eta) - s)
        z = soft_threshold(eta - g, thresh)
        k_z = _khat_forward(plan, phase, z)
        rr = relative_residual(z, eta, g, cfg.epsilon)
        fidelity = 0.5 * float(np.sum((np.real(k_z) - s) ** 2))
        l1 = cfg.lam * float(np.sum(w * np.abs(z)))
        trace.objective.append(fidelity + l1)
        trace.fidelity.append(fidelity)
        trace.l1.append(l1)
        trace.rel_residual.append(rr)
        trace.seconds.append(time.perf_counter() - start)
        if not (np.isfinite(fidelity) and np.isfinite(l1) and np.isfinite(rr)):
            raise NonFiniteIterateError(k)
        if rr < cfg.tol:
            trace.converged = True
            break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = (t - 1.0) / t_next
        eta = z + momentum * (z - z_prev)
        k_eta = k_z + momentum * (k_z - k_z_prev)
        z_prev, k_z_prev, t = z, k_z, t_next

    if cfg.residual_from == "z":
        base, k_base = z, k_z
    else:
        base, k_base = eta, k_eta
    if cfg.output == "backprojected":
        image = cfg.image_scale * _khat_adjoint(plan, phase, k_base)
    else:
        image = cfg.image_scale * base
    if cfg.add_residual:
        misfit = s - np.real(k_base)
        trace.residual_norm = float(np.linalg.norm(misfit))
        image = image + _khat_adjoint(plan, phase, misfit)
    trace.final_iterate = z * scale
    return SusceptibilityImage(image * scale, grid), trace
