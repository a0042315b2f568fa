import numpy as np
import pytest
from hypothesis import settings

from fullrange_isam.data_model import DispersionModel, make_grid
from fullrange_isam.isam import plan_nufft

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

K0 = 2 * np.pi / 0.8
K_MIN, K_MAX = K0 - 0.5, K0 + 0.5


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(16, 32, K_MIN, K_MAX, 2.0, focal_z_index=24)


@pytest.fixture(scope="session")
def small_plan(small_grid):
    return plan_nufft(small_grid)


@pytest.fixture(scope="session")
def mid_grid():
    return make_grid(64, 128, K_MIN, K_MAX, 2.0, focal_z_index=96)


@pytest.fixture(scope="session")
def mid_plan(mid_grid):
    return plan_nufft(mid_grid)


@pytest.fixture(scope="session")
def mid_dispersion(mid_grid):
    return DispersionModel.from_grid(mid_grid, K0, (80.0, 10.0))


def direct_k(grid, eta):
    """Dense exponential-sum evaluation of the ISAM forward model.

    Written in physical variables (positions in um, wavenumbers in rad/um)
    with explicit lateral DFT matrices, independent of the NUFFT code path.
    """
    n_x, n_z = grid.shape
    x, q, k = grid.x, grid.q_x, grid.k_grid
    dz = grid.axial_pitch
    c, f = grid.zero_delay_index, grid.focal_z_index
    z = (np.arange(n_z) - c) * dz
    z_f = (f - c) * dz
    lat = np.exp(-1j * q[:, None] * x[None, :]) / np.sqrt(n_x)
    eta_q = lat @ eta
    out = np.empty((n_x, n_z), dtype=complex)
    for p in range(n_x):
        beta = -np.sqrt(4 * k**2 - q[p] ** 2)
        phase = -2 * k[:, None] * z_f + beta[:, None] * (z[None, :] - z_f) + 2 * grid.k_min * z[None, :]
        out[p] = np.exp(1j * phase) @ eta_q[p] / np.sqrt(n_z)
    return lat.conj().T @ out


# criterion number -> one-line verdict, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
