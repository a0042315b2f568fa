"""Phantoms, forward simulation and pseudo-full-range test data.

The pseudo-full-range protocol turns a half-range acquisition into full-range
data with a known answer: make the spectra analytic so no negative-delay
content remains, compensate the known dispersion, take the ISAM image (scaled
by 0.5) as ground truth, slide the IFFT image axially so a virtual zero delay
bisects the content, and re-synthesize real spectra with an encoding
dispersion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fourier import axial_fft, axial_ifft
from .data_model import (
    SPACE_XK,
    ComplexSpectra,
    DispersionModel,
    GridSpec,
    RealSpectra,
    SusceptibilityImage,
)
from .isam import NufftPlan, _adjoint, _khat_forward, plan_nufft

__all__ = [
    "PhantomSpec",
    "phantom_image",
    "simulate_measurement",
    "hilbert_positive_delay",
    "synthesize_fullrange",
    "Scenario",
    "ScenarioData",
    "build_scenario",
]


@dataclass(frozen=True)
class PhantomSpec:
    """Point-scatterer phantom description.

    Either give ``scatterers`` as ``(x_um, z_um, amplitude)`` triples, with
    ``z`` measured from zero delay, or leave it ``None`` and set ``count`` and
    ``seed`` for procedural placement. Procedural scatterers get uniform random
    phase, magnitudes uniform in ``amplitude_range``, and are kept at least
    ``min_separation`` pixels apart inside the axial index window
    ``depth_range`` (half-open; whole grid if ``None``).
    """

    grid: GridSpec
    scatterers: tuple | None = None
    count: int = 0
    amplitude_range: tuple[float, float] = (0.2, 1.0)
    min_separation: float = 3.0
    seed: int | None = None
    depth_range: tuple[int, int] | None = None
    lateral_range: tuple[int, int] | None = None
    max_attempts: int = field(default=10000, repr=False)

    def to_dict(self):
        out = {
            "grid": self.grid.to_dict(),
            "count": self.count,
            "amplitude_range": list(self.amplitude_range),
            "min_separation": self.min_separation,
            "seed": self.seed,
            "depth_range": list(self.depth_range) if self.depth_range else None,
            "lateral_range": list(self.lateral_range) if self.lateral_range else None,
        }
        if self.scatterers is not None:
            out["scatterers"] = [
                [float(x), float(z), complex(a).real, complex(a).imag]
                for x, z, a in self.scatterers
            ]
        return out

    @classmethod
    def from_dict(cls, d):
        scatterers = d.get("scatterers")
        if scatterers is not None:
            scatterers = tuple((x, z, complex(re, im)) for x, z, re, im in scatterers)
        return cls(
            grid=GridSpec.from_dict(d["grid"]),
            scatterers=scatterers,
            count=d.get("count", 0),
            amplitude_range=tuple(d.get("amplitude_range", (0.2, 1.0))),
            min_separation=d.get("min_separation", 3.0),
            seed=d.get("seed"),
            depth_range=tuple(d["depth_range"]) if d.get("depth_range") else None,
            lateral_range=tuple(d["lateral_range"]) if d.get("lateral_range") else None,
        )


def phantom_image(spec: PhantomSpec) -> SusceptibilityImage:
    """Render a phantom as single-pixel scatterers.

    Raises
    ------
    ValueError
        If an explicit scatterer lies outside the grid, or procedural
        placement cannot honour ``min_separation`` within ``max_attempts``.
    """
    grid = spec.grid
    image = np.zeros(grid.shape, dtype=np.complex128)
    if spec.scatterers is not None:
        for x_um, z_um, amp in spec.scatterers:
            ix = int(round(x_um / grid.lateral_pitch))
            iz = int(round(z_um / grid.axial_pitch)) + grid.zero_delay_index
            if not (0 <= ix < grid.n_x and 0 <= iz < grid.n_z):
                raise ValueError(f"scatterer ({x_um}, {z_um}) lies outside the grid")
            image[ix, iz] += amp
        return SusceptibilityImage(image, grid)

    if spec.count == 0:
        return SusceptibilityImage(image, grid)
    if spec.seed is None:
        raise ValueError("procedural phantoms need an explicit seed")
    lo_z, hi_z = spec.depth_range or (0, grid.n_z)
    lo_x, hi_x = spec.lateral_range or (0, grid.n_x)
    if not (0 <= lo_z < hi_z <= grid.n_z and 0 <= lo_x < hi_x <= grid.n_x):
        raise ValueError("placement window lies outside the grid")
    a_lo, a_hi = spec.amplitude_range
    if not 0 <= a_lo <= a_hi:
        raise ValueError("invalid amplitude range")
    rng = np.random.default_rng(spec.seed)
    placed = []
    attempts = 0
    while len(placed) < spec.count:
        attempts += 1
        if attempts > spec.max_attempts:
            raise ValueError(
                f"could not place {spec.count} scatterers {spec.min_separation} px apart"
            )
        ix = int(rng.integers(lo_x, hi_x))
        iz = int(rng.integers(lo_z, hi_z))
        if any(np.hypot(ix - px, iz - pz) < spec.min_separation for px, pz in placed):
            continue
        placed.append((ix, iz))
    mags = rng.uniform(a_lo, a_hi, spec.count)
    phases = rng.uniform(0.0, 2 * np.pi, spec.count)
    for (ix, iz), mag, ph in zip(placed, mags, phases):
        image[ix, iz] = mag * np.exp(1j * ph)
    return SusceptibilityImage(image, grid)


def simulate_measurement(
    eta: SusceptibilityImage,
    plan: NufftPlan,
    d: DispersionModel,
    noise_sigma: float = 0.0,
    rng=None,
) -> RealSpectra:
    """Real spectra ``Re(Khat eta)`` plus optional Gaussian noise.

    The noise standard deviation is ``noise_sigma * max|Re(Khat eta)|``;
    ``rng`` is a seed or :class:`numpy.random.Generator`.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    clean = np.real(_khat_forward(plan, d.phase, eta.data))
    if noise_sigma > 0:
        rng = np.random.default_rng(rng)
        clean = clean + rng.normal(0.0, noise_sigma * np.max(np.abs(clean)), clean.shape)
    return RealSpectra(clean, plan.grid)


def hilbert_positive_delay(s: RealSpectra) -> ComplexSpectra:
    """Analytic spectra: negative delays removed, positive delays doubled."""
    image = axial_ifft(s.data)
    c = s.grid.zero_delay_index
    # index 0 is the Nyquist delay and index c is zero delay; both kept as is
    image[:, 1:c] = 0.0
    image[:, c + 1:] *= 2.0
    return ComplexSpectra(axial_fft(image), s.grid, SPACE_XK)


def synthesize_fullrange(
    half_range: RealSpectra,
    d_known: DispersionModel,
    d_encode: DispersionModel,
    delay_shift: int,
    plan: NufftPlan,
    max_wrap_fraction: float = 1e-3,
) -> tuple[SusceptibilityImage, RealSpectra]:
    """Manufacture full-range data with ground truth from half-range spectra.

    Parameters
    ----------
    half_range : RealSpectra
        Measurement whose object lies at positive delay only.
    d_known : DispersionModel
        Dispersion present in ``half_range``; compensated before imaging.
    d_encode : DispersionModel
        Dispersion applied to the synthesized full-range spectra.
    delay_shift : int
        Pixels by which content moves toward negative delay.
    plan : NufftPlan
        ISAM plan for the half-range acquisition geometry.
    max_wrap_fraction : float
        Largest fraction of image energy allowed in the band that the shift
        wraps around the array edge.

    Returns
    -------
    ground_truth, s_d
        Both carry a grid whose focal index moved with the content, so a plan
        built from ``s_d.grid`` matches the synthesized data.
    """
    grid = half_range.grid
    if plan.grid != grid:
        raise ValueError("plan grid does not match the half-range data")
    delay_shift = int(delay_shift)
    if not 0 <= delay_shift <= grid.zero_delay_index:
        raise ValueError(
            f"delay_shift must lie in [0, {grid.zero_delay_index}], got {delay_shift}"
        )
    if grid.focal_z_index - delay_shift < 0:
        raise ValueError("delay_shift moves the focal plane off the grid")

    analytic = hilbert_positive_delay(half_range).data * np.exp(-1j * d_known.phase)
    truth = 0.5 * _adjoint(plan, analytic)
    image = axial_ifft(analytic)
    for name, arr in (("image", image), ("ground truth", truth)):
        total = np.sum(np.abs(arr) ** 2)
        wrapped = np.sum(np.abs(arr[:, :delay_shift]) ** 2)
        if total > 0 and wrapped > max_wrap_fraction * total:
            raise ValueError(
                f"delay_shift {delay_shift} wraps {wrapped / total:.3g} of the {name} energy"
            )
    truth = np.roll(truth, -delay_shift, axis=1)
    image = np.roll(image, -delay_shift, axis=1)
    s_d = np.real(axial_fft(image) * np.exp(1j * d_encode.phase))

    shifted = grid.replace(focal_z_index=grid.focal_z_index - delay_shift)
    return SusceptibilityImage(truth, shifted), RealSpectra(s_d, shifted)


@dataclass(frozen=True)
class Scenario:
    """Recipe for a seeded pseudo-full-range test case.

    A procedural phantom is placed at positive delay in a half-range
    geometry, measured with ``a_known`` dispersion, then turned into
    full-range data encoded with ``a_encode``. ``None`` entries take
    geometry-derived defaults: focal plane halfway through the positive delay
    range, content from ``n_z / 32`` px past zero delay to ``3 n_z / 16`` px
    short of the array end (clear of the wrap-around band), and a shift of ``n_z / 4``
    that moves the focal plane onto the virtual zero delay.
    """

    n_x: int = 128
    n_z: int = 256
    k_min: float = 2 * np.pi / 0.8 - 0.5
    k_max: float = 2 * np.pi / 0.8 + 0.5
    lateral_pitch: float = 2.0
    focal_z_index: int | None = None
    count: int = 200
    min_separation: float = 2.0
    amplitude_range: tuple[float, float] = (0.2, 1.0)
    depth_range: tuple[int, int] | None = None
    a_known: tuple[float, ...] = ()
    a_encode: tuple[float, ...] = (80.0,)
    k_0: float | None = None
    delay_shift: int | None = None
    noise_sigma: float = 0.0
    kernel_width: int = 6
    oversampling: float = 2.0

    def half_range_grid(self) -> GridSpec:
        focal = 3 * self.n_z // 4 if self.focal_z_index is None else self.focal_z_index
        return GridSpec(self.n_x, self.n_z, self.k_min, self.k_max, self.lateral_pitch, focal)

    def to_dict(self):
        out = {}
        for key in self.__dataclass_fields__:
            value = getattr(self, key)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class ScenarioData:
    ground_truth: SusceptibilityImage
    spectra: RealSpectra
    dispersion: DispersionModel
    phantom: SusceptibilityImage
    half_range: RealSpectra


def build_scenario(scenario: Scenario, seed: int) -> ScenarioData:
    """Generate the phantom, its half-range measurement and the full-range data."""
    if seed is None:
        raise ValueError("a seed is required")
    grid = scenario.half_range_grid()
    c = grid.zero_delay_index
    depth = scenario.depth_range or (c + grid.n_z // 32, grid.n_z - 3 * grid.n_z // 16)
    k_0 = grid.k_center if scenario.k_0 is None else scenario.k_0
    rng = np.random.default_rng(seed)
    phantom_seed, noise_seed = rng.integers(0, 2**63 - 1, size=2)
    phantom = phantom_image(PhantomSpec(
        grid,
        count=scenario.count,
        amplitude_range=tuple(scenario.amplitude_range),
        min_separation=scenario.min_separation,
        seed=int(phantom_seed),
        depth_range=tuple(depth),
    ))
    plan = plan_nufft(grid, scenario.kernel_width, scenario.oversampling)
    d_known = DispersionModel.from_grid(grid, k_0, scenario.a_known)
    d_encode = DispersionModel.from_grid(grid, k_0, scenario.a_encode)
    half = simulate_measurement(phantom, plan, d_known, scenario.noise_sigma, int(noise_seed))
    shift = grid.n_z // 4 if scenario.delay_shift is None else scenario.delay_shift
    truth, s_d = synthesize_fullrange(half, d_known, d_encode, shift, plan)
    return ScenarioData(
        ground_truth=truth,
        spectra=s_d,
        dispersion=DispersionModel.from_grid(s_d.grid, k_0, scenario.a_encode),
        phantom=phantom,
        half_range=half,
    )
