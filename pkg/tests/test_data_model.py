import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fullrange_isam.data_model import (
    SPACE_QK,
    ComplexSpectra,
    DispersionModel,
    GridSpec,
    RealSpectra,
    SusceptibilityImage,
    WeightVector,
    as_array,
    make_grid,
)


def test_make_grid_small_example():
    g = make_grid(2, 4, 7.0, 8.0, 1.0, 2)
    np.testing.assert_allclose(g.k_grid, [7.0, 7 + 1 / 3, 7 + 2 / 3, 8.0], rtol=0, atol=1e-15)


def test_make_grid_instrument_scale():
    pitch = 2000.0 / 1024
    g = make_grid(1024, 2048, 7.5, 8.2, pitch, 1024)
    assert g.shape == (1024, 2048)
    assert g.lateral_pitch == pytest.approx(1.953, abs=1e-3)


@pytest.mark.parametrize("kwargs", [
    dict(n_x=2, n_z=4, k_min=8.0, k_max=7.0, lateral_pitch=1.0, focal_z_index=2),
    dict(n_x=1, n_z=4, k_min=7.0, k_max=8.0, lateral_pitch=1.0, focal_z_index=2),
    dict(n_x=2, n_z=2, k_min=7.0, k_max=8.0, lateral_pitch=1.0, focal_z_index=1),
    dict(n_x=2, n_z=5, k_min=7.0, k_max=8.0, lateral_pitch=1.0, focal_z_index=2),
    dict(n_x=2, n_z=4, k_min=7.0, k_max=8.0, lateral_pitch=0.0, focal_z_index=2),
    dict(n_x=2, n_z=4, k_min=7.0, k_max=8.0, lateral_pitch=1.0, focal_z_index=4),
    dict(n_x=2, n_z=4, k_min=0.0, k_max=8.0, lateral_pitch=1.0, focal_z_index=0),
])
def test_invalid_grids_rejected(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


def test_default_focus_is_zero_delay():
    assert make_grid(4, 16, 7.0, 8.0, 1.0).focal_z_index == 8


def test_axial_geometry():
    g = make_grid(4, 16, 7.0, 8.0, 1.0)
    assert g.dk == pytest.approx(1 / 15)
    assert g.axial_pitch == pytest.approx(np.pi / (16 * g.dk))
    assert g.z[g.zero_delay_index] == 0.0


@given(
    n_x=st.integers(2, 40),
    half_z=st.integers(2, 64),
    k_min=st.floats(0.5, 20.0),
    span=st.floats(0.01, 5.0),
    pitch=st.floats(0.1, 10.0),
    data=st.data(),
)
def test_grid_roundtrip_and_uniformity(n_x, half_z, k_min, span, pitch, data):
    n_z = 2 * half_z
    focal = data.draw(st.integers(0, n_z - 1))
    g = GridSpec(n_x, n_z, k_min, k_min + span, pitch, focal)
    diffs = np.diff(g.k_grid)
    assert np.max(np.abs(diffs - diffs.mean())) < 1e-9 * abs(diffs.mean())
    back = GridSpec.from_dict(json.loads(json.dumps(g.to_dict())))
    assert back == g
    assert np.array_equal(back.k_grid, g.k_grid)


def test_containers_are_read_only(small_grid, rng):
    s = RealSpectra(rng.standard_normal(small_grid.shape), small_grid)
    with pytest.raises(ValueError):
        s.data[0, 0] = 1.0


def test_containers_copy_input(small_grid):
    arr = np.zeros(small_grid.shape)
    s = RealSpectra(arr, small_grid)
    arr[0, 0] = 5.0
    assert s.data[0, 0] == 0.0


def test_container_validation(small_grid):
    with pytest.raises(ValueError):
        RealSpectra(np.zeros((3, 3)), small_grid)
    with pytest.raises(ValueError):
        RealSpectra(np.full(small_grid.shape, np.nan), small_grid)
    with pytest.raises(TypeError):
        RealSpectra(np.zeros(small_grid.shape, complex), small_grid)
    with pytest.raises(ValueError):
        SusceptibilityImage(np.full(small_grid.shape, np.inf + 0j), small_grid)
    with pytest.raises(ValueError):
        ComplexSpectra(np.zeros(small_grid.shape, complex), small_grid, "bogus")


def test_complex_spectra_space_tag(small_grid):
    c = ComplexSpectra(np.zeros(small_grid.shape, complex), small_grid, SPACE_QK)
    assert c.space == SPACE_QK


def test_as_array_unwraps_containers(small_grid):
    img = SusceptibilityImage(np.ones(small_grid.shape, complex), small_grid)
    assert as_array(img) is img.data
    arr = np.ones(3)
    assert as_array(arr) is arr


def test_dispersion_model_roundtrip(small_grid):
    d = DispersionModel.from_grid(small_grid, 7.8, (12.5, -3.0, 0.25))
    back = DispersionModel.from_dict(json.loads(json.dumps(d.to_dict())), small_grid)
    assert back.coeffs == d.coeffs and back.k_0 == d.k_0
    assert np.array_equal(back.phase, d.phase)
    assert d.order == 4 and d.a2 == 12.5 and d.a3 == -3.0


def test_dispersion_order_limit(small_grid):
    with pytest.raises(ValueError):
        DispersionModel.from_grid(small_grid, 7.8, (1.0, 1.0, 1.0, 1.0, 1.0))


def test_dispersion_nonfinite_rejected(small_grid):
    with pytest.raises(ValueError):
        DispersionModel.from_grid(small_grid, 7.8, (np.nan,))


def test_weight_vector(small_grid):
    w = WeightVector(np.linspace(0.5, 1.0, small_grid.n_z))
    assert len(w) == small_grid.n_z
    assert np.array_equal(WeightVector.from_dict(w.to_dict()).w, w.w)
    with pytest.raises(ValueError):
        WeightVector(np.array([1.0, -0.1]))
