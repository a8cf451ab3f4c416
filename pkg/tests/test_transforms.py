import numpy as np
import pytest
from hypothesis import given, strategies as st

from chargetransfer.model import PotentialSpec, build_hamiltonian, sample_scalar_potential
from chargetransfer.propagate import evolve_to, free_evolve
from chargetransfer.spectral import make_grid, norm_lp
from chargetransfer.spectrum import bound_states_scalar, build_projections
from chargetransfer.transforms import (
    frame,
    frame_inverse,
    galilei,
    galilei_inverse,
    matrix_galilei,
    matrix_galilei_inverse,
    modulation,
    modulation_inverse,
    moving_projection,
)

from conftest import band_limited

# box length 16*pi puts v = 1 and v = 0.5 on the frequency lattice
GRID = make_grid(1, 256, 16 * np.pi)
seeds = st.integers(0, 2**32 - 1)


def test_identity_at_rest(rng):
    f = band_limited(GRID, rng)
    assert np.allclose(galilei(GRID, f, 0.0, 3.0), f, atol=1e-13)
    spinor = band_limited(GRID, rng, components=2)
    assert np.allclose(matrix_galilei(GRID, spinor, 0.0, 3.0), spinor, atol=1e-13)
    assert np.allclose(modulation(spinor, 0.0, 0.0, 5.0), spinor)


@given(seeds, st.floats(-2, 2), st.floats(0, 5))
def test_boost_is_l2_isometry(seed, v, t):
    f = band_limited(GRID, np.random.default_rng(seed))
    g = galilei(GRID, f, v, t, y=0.3)
    assert norm_lp(GRID, g, 2) == pytest.approx(norm_lp(GRID, f, 2), rel=1e-12)


lattice_v = st.integers(-16, 16).map(lambda m: m / 8.0)


@given(seeds, lattice_v, st.floats(0, 5))
def test_inverse_undoes_boost(seed, v, t):
    f = band_limited(GRID, np.random.default_rng(seed))
    g = galilei(GRID, f, v, t, y=0.3)
    assert np.allclose(galilei_inverse(GRID, g, v, t, y=0.3), f, atol=1e-12)


@given(seeds, st.sampled_from([0.5, 1.0, -1.0]), st.floats(0.1, 4))
def test_intertwining(seed, v, t):
    f = band_limited(GRID, np.random.default_rng(seed))
    lhs = galilei(GRID, free_evolve(GRID, f, t), v, t)
    rhs = free_evolve(GRID, galilei(GRID, f, v, 0.0), t)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_inverse_without_offset_is_reverse_boost(rng):
    f = band_limited(GRID, rng)
    assert np.allclose(galilei_inverse(GRID, f, 1.0, 2.0), galilei(GRID, f, -1.0, 2.0), atol=1e-12)


def test_opposite_boosts_compose_to_constant_phase(rng):
    f = band_limited(GRID, rng) + 2.0
    h = galilei(GRID, galilei(GRID, f, 1.0, 1.5), -1.0, 1.5)
    ratio = h / f
    assert np.max(np.abs(np.abs(ratio) - 1)) < 1e-12
    assert np.max(np.abs(ratio - ratio[0])) < 1e-12


@given(seeds)
def test_matrix_boost_is_isometry_in_lp(seed):
    # a lattice shift (t v = 32 cells) keeps sampled L1 and L-infinity norms exact
    spinor = band_limited(GRID, np.random.default_rng(seed), kmax=2.0, components=2)
    t = 32 * GRID.spacing
    out = matrix_galilei(GRID, spinor, 1.0, t)
    for c in range(2):
        for p in (1, 2, np.inf):
            assert norm_lp(GRID, out[c], p) == pytest.approx(norm_lp(GRID, spinor[c], p), rel=1e-10)
    assert np.allclose(matrix_galilei_inverse(GRID, out, 1.0, t), spinor, atol=1e-12)


def test_matrix_boost_preserves_conjugate_pair(rng):
    a = band_limited(GRID, rng)
    out = matrix_galilei(GRID, np.stack([a, a.conj()]), 0.5, 1.3, y=0.2)
    assert np.allclose(out[1], out[0].conj(), atol=1e-12)


def test_modulation_unimodular(rng):
    spinor = band_limited(GRID, rng, components=2)
    m = modulation(spinor, 1.3, 0.7, 2.0)
    assert np.allclose(np.abs(m), np.abs(spinor))
    assert np.allclose(modulation_inverse(m, 1.3, 0.7, 2.0), spinor)
    omega = 1.3 ** 2 * 2.0 + 0.7
    assert np.allclose(m[0], np.exp(-0.5j * omega) * spinor[0])


def test_frame_roundtrip(rng):
    spinor = band_limited(GRID, rng, components=2)
    out = frame(GRID, spinor, "matrix", 1.0, 0.8, alpha=1.0, gamma=0.7)
    assert np.allclose(frame_inverse(GRID, out, "matrix", 1.0, 0.8, alpha=1.0, gamma=0.7), spinor, atol=1e-12)


@pytest.fixture(scope="module")
def well_projector():
    g = make_grid(1, 512, 16 * np.pi)
    basis = bound_states_scalar(sample_scalar_potential(PotentialSpec("sech2", -1.0), g), g)
    return g, build_projections(basis)[0]


def test_moving_projection_at_rest(well_projector, rng):
    g, Pb = well_projector
    f = band_limited(g, rng)
    P = moving_projection(Pb, "scalar", 0.0, 0.0)
    assert np.allclose(P(f), Pb(f), atol=1e-13)


def test_moving_projection_idempotent(well_projector, rng):
    g, Pb = well_projector
    f = band_limited(g, rng)
    P = moving_projection(Pb, "scalar", 1.0, 2.5)
    once = P(f)
    assert np.max(np.abs(P(once) - once)) < 1e-8


def test_moving_projection_two_paths(well_projector, rng):
    g, Pb = well_projector
    f = band_limited(g, rng)
    direct = norm_lp(g, moving_projection(Pb, "scalar", 1.0, 2.5)(f), 2)
    via_frame = norm_lp(g, Pb(galilei(g, f, 1.0, 2.5)), 2)
    assert abs(direct - via_frame) < 1e-10


def test_moving_frame_solves_shifted_equation():
    g = make_grid(1, 512, 16 * np.pi)
    v = 1.0
    static = build_hamiltonian(g, "scalar", 0.0, [PotentialSpec("sech2", -1.0)])
    moving = build_hamiltonian(g, "scalar", 0.0, [PotentialSpec("sech2", -1.0, velocity=(v,))])
    phi0 = np.exp(-(g.axis - 1) ** 2 + 0.3j * g.axis)
    dt, t = 1e-3, 1.0
    via = galilei_inverse(g, evolve_to(galilei(g, phi0, v, 0.0), static, 0.0, t, dt), v, t)
    direct = evolve_to(phi0, moving, 0.0, t, dt)
    assert norm_lp(g, via - direct, 2) < 1e-4
