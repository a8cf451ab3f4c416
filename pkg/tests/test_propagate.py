import numpy as np
import pytest

from chargetransfer.model import Envelope, PotentialSpec, build_hamiltonian, sample_scalar_potential
from chargetransfer.propagate import (
    evolve_to,
    ForcingSpec,
    NumericalAbort,
    SplitStepper,
    evolve,
    evolve_backward,
    free_evolve,
    step,
    verify_translaw,
    wave_operator_image,
)
from chargetransfer.spectral import fft, ifft, make_grid, norm_lp
from chargetransfer.spectrum import bound_states_scalar

from conftest import band_limited

GRID = make_grid(1, 512, 16 * np.pi)


def test_free_evolve_identity_and_plane_wave(rng):
    f = band_limited(GRID, rng)
    assert np.allclose(free_evolve(GRID, f, 0.0), f)
    xi0 = 1.5
    wave = np.exp(1j * xi0 * GRID.axis)
    out = free_evolve(GRID, wave, 2.0)
    assert np.allclose(out, np.exp(-1j * 2.0 * xi0 ** 2 / 2) * wave, atol=1e-12)


def test_free_step_matches_free_flow(rng):
    f = band_limited(GRID, rng)
    ham = build_hamiltonian(GRID, "scalar")
    assert np.max(np.abs(step(f, ham, 0.0, 0.05) - free_evolve(GRID, f, 0.05))) < 1e-14


def test_free_matrix_multipliers(rng):
    f = band_limited(GRID, rng, components=2)
    out = free_evolve(GRID, f, 1.0, "matrix", 0.5)
    k2 = GRID.k2
    assert np.allclose(fft(GRID, out[0]), np.exp(-1j * (k2 / 2 + 0.5)) * fft(GRID, f[0]))
    assert np.allclose(fft(GRID, out[1]), np.exp(1j * (k2 / 2 + 0.5)) * fft(GRID, f[1]))


def test_free_evolution_sampled(rng):
    f = band_limited(GRID, rng)
    traj = evolve(f, build_hamiltonian(GRID, "scalar"), 0.0, 2.0, 0.1, samples=5)
    assert np.allclose(traj.times, [0, 0.5, 1.0, 1.5, 2.0])
    for t, s in zip(traj.times, traj.states):
        assert np.max(np.abs(s - free_evolve(GRID, f, t))) < 1e-12


def test_bound_state_stays_stationary():
    V = sample_scalar_potential(PotentialSpec("sech2", -1.0), GRID)
    basis = bound_states_scalar(V, GRID)
    u = basis.fields[0]
    ham = build_hamiltonian(GRID, "scalar", 0.0, [PotentialSpec("sech2", -1.0)])
    psi = evolve_to(u, ham, 0.0, 5.0, 0.01)
    overlap = abs(np.vdot(u, psi)) * GRID.weight / norm_lp(GRID, u, 2) ** 2
    assert overlap > 1 - 1e-6


def test_l2_conserved_for_real_potentials(rng):
    ham = build_hamiltonian(GRID, "scalar", 0.0, [PotentialSpec("sech2", -1.0), PotentialSpec("gaussian", 0.5, velocity=(1.0,))])
    traj = evolve(band_limited(GRID, rng), ham, 0.0, 3.0, 0.01, samples=7)
    assert np.ptp(traj.norms["l2"]) < 1e-10


def test_strang_order_two_potentials():
    ham = build_hamiltonian(GRID, "scalar", 0.0, [
        PotentialSpec("sech2", -1.0), PotentialSpec("sech2", -1.0, center=(-5.0,), velocity=(2.0,))])
    psi0 = np.exp(-(GRID.axis - 1) ** 2 / 2 + 0.5j * GRID.axis)
    dt = 0.05
    ref = evolve_to(psi0, ham, 0.0, 2.0, dt / 8)
    e1 = norm_lp(GRID, evolve_to(psi0, ham, 0.0, 2.0, dt) - ref, 2)
    e2 = norm_lp(GRID, evolve_to(psi0, ham, 0.0, 2.0, dt / 2) - ref, 2)
    assert 3.5 <= e1 / e2 <= 4.5


def test_backward_inverts_forward(rng):
    ham = build_hamiltonian(GRID, "scalar", 0.0, [PotentialSpec("sech2", -1.0, velocity=(0.5,))])
    f = band_limited(GRID, rng)
    there = evolve_to(f, ham, 0.0, 1.0, 0.01)
    assert np.max(np.abs(evolve_backward(there, ham, 1.0, 0.0, 0.01) - f)) < 1e-10


def test_forced_free_equation_against_closed_form():
    # psi_t = -i H0 psi + i exp(-t) g, psi(0) = 0, solved mode by mode
    forcing = ForcingSpec("gaussian", 1.0, (2.0,), Envelope(1.0, 1.0))
    ham = build_hamiltonian(GRID, "scalar")
    g_hat = fft(GRID, forcing.spatial(GRID))
    T = 2.0
    z = 0.5j * GRID.k2 - 1.0
    exact = ifft(GRID, 1j * g_hat * np.exp(-0.5j * T * GRID.k2) * np.expm1(T * z) / z)
    errs = []
    for dt in (0.02, 0.01):
        psi = evolve_to(np.zeros(GRID.n, complex), ham, 0.0, T, dt, forcing=forcing)
        errs.append(norm_lp(GRID, psi - exact, 2))
    assert errs[1] < 1e-4
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_nan_aborts():
    ham = build_hamiltonian(GRID, "scalar")
    bad = np.full(GRID.n, np.nan, dtype=complex)
    with pytest.raises(NumericalAbort):
        evolve(bad, ham, 0.0, 0.1, 0.01)


def test_rejects_fractional_step_count():
    with pytest.raises(ValueError):
        evolve(np.zeros(GRID.n), build_hamiltonian(GRID, "scalar"), 0.0, 1.0, 0.3)


def test_wave_image_trivial_when_other_channel_is_empty():
    ham = build_hamiltonian(GRID, "scalar", 0.0, [
        PotentialSpec("sech2", -1.0), PotentialSpec("sech2", 0.0, velocity=(1.0,))])
    V = sample_scalar_potential(PotentialSpec("sech2", -1.0), GRID)
    basis = bound_states_scalar(V, GRID)
    img = wave_operator_image(basis.fields[0], basis.eigenvalues[0], ham, 2.0, 0.01)
    assert np.max(np.abs(img.field - basis.fields[0])) < 1e-12
    assert img.cauchy_defect < 1e-10 and img.converged


TL_GRID = make_grid(1, 256, 40.0)
PSI0 = np.stack([np.exp(-TL_GRID.axis ** 2), 0.5 * np.exp(-(TL_GRID.axis - 1) ** 2)]).astype(complex)


def test_translaw_free_reduction():
    pot = PotentialSpec("sech2", 0.0, alpha=1.0, gamma=0.7, velocity=(1.0,))
    assert verify_translaw(TL_GRID, pot, PSI0, 1.0, 1e-2) < 1e-10


def test_translaw_resting_uncoupled():
    pot = PotentialSpec("sech2", -1.0, alpha=1.0)
    # same splitting on both routes isolates the mu-shift bookkeeping
    assert verify_translaw(TL_GRID, pot, PSI0, 1.0, 1e-2) < 1e-8


def test_translaw_full_case_second_order():
    pot = PotentialSpec("sech2", -1.0, w_amplitude=0.5, alpha=1.0, gamma=0.7, velocity=(1.0,))
    e1 = verify_translaw(TL_GRID, pot, PSI0, 1.0, 1e-3, "exact")
    e2 = verify_translaw(TL_GRID, pot, PSI0, 1.0, 5e-4, "exact")
    assert e1 < 1e-3
    assert 3.5 <= e1 / e2 <= 4.5
    assert verify_translaw(TL_GRID, pot, PSI0, 1.0, 1e-3) < 1e-10


def test_negative_step_runs_backwards(rng):
    ham = build_hamiltonian(GRID, "scalar", 0.0, [PotentialSpec("sech2", -1.0)])
    f = band_limited(GRID, rng)
    fwd = SplitStepper(ham, 0.01).advance(f, 0.0, 10)
    assert np.allclose(SplitStepper(ham, -0.01).advance(fwd, 0.1, 10), f, atol=1e-12)
