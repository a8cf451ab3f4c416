import numpy as np
import pytest

from chargetransfer.channels import (
    CutoffError,
    StabilizationError,
    asymptotic_decomposition,
    channel_bases,
    channel_cutoffs,
    moving_bound_state,
    projection_decay_series,
    scattering_state,
    smoothstep,
)
from chargetransfer.model import PotentialSpec, build_hamiltonian, sample_scalar_potential
from chargetransfer.propagate import evolve, wave_operator_image
from chargetransfer.spectral import make_grid, norm_lp


def test_smoothstep_ends():
    s = np.linspace(-1, 2, 301)
    q = smoothstep(s)
    assert np.all(q[s <= 0] == 1) and np.all(q[s >= 1] == 0)
    assert np.all(np.diff(q) <= 0)


def test_cutoffs_partition_and_centre():
    g = make_grid(1, 1024, 200.0)
    cut = channel_cutoffs(g, 20.0, [0.0, 2.0])
    assert cut.chi1[np.argmin(np.abs(g.axis))] == 1.0
    assert np.allclose(sum(cut.chi), 1.0)
    assert np.max(cut.chi1 * cut.chi2) == 0.0
    assert np.all(cut.chi3 >= -1e-15)


def test_cutoffs_before_t0():
    g = make_grid(1, 256, 50.0)
    with pytest.raises(CutoffError):
        channel_cutoffs(g, 1.0, [0.0, 1.0], radius=2.0)


def test_support_separation_for_compact_wells():
    g = make_grid(1, 2048, 400.0)
    other = PotentialSpec("compact-bump", -1.0, velocity=(2.0,))
    cut0 = channel_cutoffs(g, 5.0, [0.0, 2.0], radius=1.0)
    for t in np.linspace(cut0.t0, 40.0, 8):
        cut = channel_cutoffs(g, t, [0.0, 2.0], radius=1.0)
        assert np.max(np.abs(cut.chi1 * sample_scalar_potential(other, g, t))) == 0.0


GRID = make_grid(1, 1024, 2 * np.pi * 16)
WELLS = [PotentialSpec("sech2", -1.0, velocity=(0.0,)), PotentialSpec("sech2", -1.0, velocity=(2.0,))]


@pytest.fixture(scope="module")
def two_wells():
    ham = build_hamiltonian(GRID, "scalar", 0.0, WELLS)
    return ham, channel_bases(ham)


def test_free_model_has_no_channels():
    ham = build_hamiltonian(GRID, "scalar")
    traj = evolve(np.exp(-GRID.axis ** 2), ham, 0.0, 1.0, 0.1, samples=3)
    with pytest.raises(ValueError):
        projection_decay_series(traj, ham, channel_bases(ham))


def test_bound_state_reproduces_itself(two_wells):
    ham, bases = two_wells
    b = bases[1].basis
    psi0 = moving_bound_state(ham, 1, b.fields[0], b.eigenvalues[0], 0.0)
    traj = evolve(psi0, ham, 0.0, 1.0, 0.01, samples=5)
    series = projection_decay_series(traj, ham, bases)
    assert series[1].values[0] == pytest.approx(norm_lp(GRID, b.fields[0], 2), rel=1e-10)
    assert series[1].values[-1] > 0.9 * series[1].values[0]


def test_wave_image_removes_channel_content(two_wells):
    ham, bases = two_wells
    b = bases[0].basis
    img = wave_operator_image(b.fields[0], b.eigenvalues[0], ham, 8.0, 0.01)
    phi = scattering_state(img.field, ham, bases, 8.0, 0.01, samples=41)
    assert norm_lp(GRID, phi, 2) < 0.05 * norm_lp(GRID, img.field, 2)


def test_single_well_eigenstate_decomposition():
    g = make_grid(1, 512, 2 * np.pi * 8)
    ham = build_hamiltonian(g, "scalar", 0.0, [PotentialSpec("sech2", -1.0)])
    bases = channel_bases(ham)
    u = bases[0].basis.fields[0]
    rep = asymptotic_decomposition(u, ham, bases, 5.0, 0.01, samples=21)
    # the eigenphase carries the O(dt^2 T) splitting error
    assert abs(rep.coefficients[0]["A"] - 1) < 1e-4
    assert norm_lp(g, rep.phi0, 2) < 1e-4
    assert np.max(rep.remainder) < 1e-4
    assert rep.stabilized


def test_free_model_decomposition_is_trivial():
    g = make_grid(1, 512, 100.0)
    ham = build_hamiltonian(g, "scalar")
    psi0 = np.exp(-g.axis ** 2 + 0.3j * g.axis)
    rep = asymptotic_decomposition(psi0, ham, channel_bases(ham), 4.0, 0.05, samples=9)
    assert rep.coefficients == []
    assert np.allclose(rep.phi0, psi0, atol=1e-12)
    assert np.max(rep.remainder) < 1e-12
    assert rep.summary()["phi0_l2"] == pytest.approx(norm_lp(g, psi0, 2), rel=1e-12)


def test_unstable_coefficients_raise_in_strict_mode(two_wells):
    ham, bases = two_wells
    # a packet aimed at the moving well is still being captured/released at T = 1
    psi0 = np.exp(-(GRID.axis + 3) ** 2 + 2.0j * GRID.axis)
    with pytest.raises(StabilizationError):
        scattering_state(psi0, ham, bases, 1.0, 0.01, samples=21, drift_tol=1e-6)
