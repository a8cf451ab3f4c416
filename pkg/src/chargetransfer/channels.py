"""Moving bound-state projections and the asymptotic channel decomposition."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import HamiltonianSpec, potential_fields, profile_radius
from .propagate import Trajectory, evolve, free_evolve, wave_operator_image
from .spectral import Grid, norm_lp
from .spectrum import (
    BoundStateBasis,
    Projector,
    bound_states_scalar,
    build_projections,
    matrix_spectrum_dense,
)
from . import transforms

log = logging.getLogger(__name__)

__all__ = [
    "CutoffError",
    "StabilizationError",
    "ChannelCutoffs",
    "ChannelBasis",
    "ProjectionSeries",
    "CompletenessReport",
    "smoothstep",
    "channel_cutoffs",
    "channel_bases",
    "moving_bound_state",
    "projection_decay_series",
    "coefficient_series",
    "scattering_state",
    "asymptotic_decomposition",
]


class CutoffError(ValueError):
    """Cutoffs requested before ``t0``."""


class StabilizationError(RuntimeError):
    """A limit read off at the final time has not settled."""


def smoothstep(s: np.ndarray) -> np.ndarray:
    """Quintic ``1 -> 0`` transition on ``[0, 1]`` with two vanishing derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass
class ChannelCutoffs:
    """Partition of unity ``chi[0] + ... + chi[-1] = 1``; the last entry is the free region."""

    t: float
    delta: float
    t0: float
    chi: list

    @property
    def chi1(self) -> np.ndarray:
        return self.chi[0]

    @property
    def chi2(self) -> np.ndarray:
        return self.chi[1]

    @property
    def chi3(self) -> np.ndarray:
        return self.chi[-1]


def _radius_field(grid: Grid, center: np.ndarray) -> np.ndarray:
    L = grid.length
    d = [np.mod(x - c + 0.5 * L, L) - 0.5 * L for x, c in zip(grid.x, center)]
    return np.sqrt(sum(c * c for c in d))


def default_delta(velocities: Sequence) -> float:
    v = [np.atleast_1d(np.asarray(u, dtype=float)) for u in velocities]
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(v) for b in v[i + 1:]]
    if not gaps:
        raise ValueError("cutoffs need at least two velocities")
    return 0.1 * min(gaps)


def channel_cutoffs(
    grid: Grid,
    t: float,
    velocities: Sequence,
    delta: float | None = None,
    centers: Sequence | None = None,
    t0: float | None = None,
    radius: float = 0.0,
) -> ChannelCutoffs:
    """``chi_j(t, x) = q(|x - c_j - t v_j| / (delta t))`` plus the free complement.

    ``q`` is 1 up to ``delta t`` and 0 beyond ``2 delta t``.  ``t0`` defaults to
    the first time with ``2 delta t0 >= 2 radius`` (the cutoff then covers the
    potential support).
    """
    delta = default_delta(velocities) if delta is None else float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if t0 is None:
        t0 = max(radius / delta, 0.0)
    if t < t0 or t <= 0:
        raise CutoffError(f"cutoffs are defined for t >= t0 = {t0:g} (and t > 0), got t={t:g}")
    if centers is None:
        centers = [np.zeros(grid.dim)] * len(velocities)
    chis = []
    for c, v in zip(centers, velocities):
        pos = np.atleast_1d(np.asarray(c, float)) + t * np.atleast_1d(np.asarray(v, float))
        r = _radius_field(grid, pos)
        chis.append(smoothstep(r / (delta * t) - 1.0))
    chis.append(1.0 - sum(chis))
    return ChannelCutoffs(float(t), delta, float(t0), chis)


# --------------------------------------------------------------------------
# channel bases and moving states

@dataclass
class ChannelBasis:
    """Static spectral data of one channel and its projections."""

    index: int
    basis: BoundStateBasis
    Pb: Projector
    Pc: Projector


def channel_bases(ham: HamiltonianSpec, max_count: int = 8, tol: float = 1e-8) -> list[ChannelBasis]:
    """Bound states of every channel operator (iterative scalar path, dense matrix path)."""
    out = []
    for j in range(len(ham.potentials)):
        ch = ham.channel(j)
        if ham.kind == "scalar":
            basis = bound_states_scalar(potential_fields(ch, 0.0), ham.grid, max_count, tol)
        else:
            basis = matrix_spectrum_dense(ch)
        Pb, Pc = build_projections(basis)
        out.append(ChannelBasis(j, basis, Pb, Pc))
    return out


def _frame_args(ham: HamiltonianSpec, j: int):
    p = ham.potentials[j]
    return p.velocity, p.alpha, p.gamma


def moving_bound_state(ham: HamiltonianSpec, j: int, u: np.ndarray, eigenvalue: complex, t: float) -> np.ndarray:
    """Channel bound state carried along potential ``j`` with its phase ``exp(-i lam t)``."""
    v, a, g = _frame_args(ham, j)
    return transforms.frame_inverse(ham.grid, np.exp(-1j * eigenvalue * t) * u, ham.kind, v, t, a, g)


def coefficient_series(trajectory: Trajectory, ham: HamiltonianSpec, cb: ChannelBasis) -> np.ndarray:
    """``a_r(t) = exp(i lam_r t) sum_i c_ir <frame_j(t) psi(t), psi_i>``, shape ``(times, m)``."""
    if trajectory.states is None:
        raise ValueError("coefficient series need stored states")
    v, a, g = _frame_args(ham, cb.index)
    lam = cb.basis.eigenvalues
    out = np.empty((len(trajectory.times), len(lam)), dtype=complex)
    for k, (t, psi) in enumerate(zip(trajectory.times, trajectory.states)):
        moved = transforms.frame(ham.grid, psi, ham.kind, v, t, a, g)
        out[k] = np.exp(1j * lam * t) * cb.Pb.coefficients_of(moved)
    return out


@dataclass
class ProjectionSeries:
    channel: int
    times: np.ndarray
    values: np.ndarray
    rate: float | None
    log_constant: float | None
    residual: float | None
    status: str


def _exp_fit(t: np.ndarray, n: np.ndarray, floor_rel: float = 1e-9):
    floor = floor_rel * n[0] if n[0] > 0 else floor_rel * n.max()
    mask = n > 10.0 * floor
    if mask.sum() < 3:
        return None, None, None, "degenerate (already orthogonal)"
    A = np.column_stack([np.ones(mask.sum()), -t[mask]])
    coef, *_ = np.linalg.lstsq(A, np.log(n[mask]), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(n[mask])) ** 2)))
    return float(coef[1]), float(coef[0]), resid, "ok"


def projection_decay_series(trajectory: Trajectory, ham: HamiltonianSpec,
                            bases: Sequence[ChannelBasis], window: tuple | None = None) -> list[ProjectionSeries]:
    """``n_j(t) = ||P_b(H_j, t) psi(t)||_2`` with an exponential fit ``log n = log C - alpha t``."""
    if not bases or all(len(cb.basis) == 0 for cb in bases):
        raise ValueError("projection series need at least one nonempty channel basis")
    if trajectory.states is None:
        raise ValueError("projection series need stored states")
    out = []
    for cb in bases:
        v, a, g = _frame_args(ham, cb.index)
        vals = []
        for t, psi in zip(trajectory.times, trajectory.states):
            proj = transforms.moving_projection(cb.Pb, ham.kind, v, t, a, g)
            vals.append(norm_lp(ham.grid, proj(psi), 2))
        vals = np.array(vals)
        t = trajectory.times
        sel = np.ones(len(t), bool) if window is None else (t >= window[0]) & (t <= window[1])
        rate, logc, resid, status = _exp_fit(t[sel], vals[sel])
        out.append(ProjectionSeries(cb.index, t, vals, rate, logc, resid, status))
    return out


# --------------------------------------------------------------------------
# scattering states and completeness

def _drift(series: np.ndarray, times: np.ndarray, T: float, scale: float) -> float:
    last = series[times >= 0.75 * T - 1e-12]
    if last.size == 0:
        return 0.0
    return float(np.max(np.abs(last - series[-1])) / scale)


@dataclass
class _Decomposition:
    coefficients: list
    images: list
    phi: np.ndarray
    trajectory: Trajectory
    drifts: list


def _decompose(psi0, ham, bases, T, dt, samples, drift_tol, strict, floor):
    grid = ham.grid
    traj = evolve(psi0, ham, 0.0, T, dt, samples=samples, record_norms=False)
    norm0 = norm_lp(grid, psi0, 2)
    coeffs, images, drifts = [], [], []
    phi = np.array(psi0, dtype=complex)
    for cb in bases:
        if len(cb.basis) == 0:
            continue
        series = coefficient_series(traj, ham, cb)
        for r in range(len(cb.basis)):
            u = cb.basis.fields[r]
            lam = complex(cb.basis.eigenvalues[r])
            A = complex(series[-1, r])
            scale = max(abs(A), floor * norm0 / max(norm_lp(grid, u, 2), 1e-300))
            d = _drift(series[:, r], traj.times, T, scale)
            img = wave_operator_image(u, lam, ham, T, dt, channel=cb.index)
            coeffs.append({"channel": cb.index, "index": r, "eigenvalue": lam, "A": A,
                           "drift": d, "series": series[:, r]})
            images.append(img)
            drifts.append(d)
            phi = phi - A * img.field
    bad = [c for c in coeffs if c["drift"] > drift_tol]
    if bad and strict:
        worst = max(c["drift"] for c in bad)
        raise StabilizationError(
            f"projection coefficients drift by {worst:.3g} (> {drift_tol:g}) over the last quarter; increase T"
        )
    return _Decomposition(coeffs, images, phi, traj, drifts)


def scattering_state(psi0: np.ndarray, ham: HamiltonianSpec, bases: Sequence[ChannelBasis], T: float,
                     dt: float, samples: int = 81, drift_tol: float = 0.05, strict: bool = True,
                     floor: float = 1e-2) -> np.ndarray:
    """``phi = psi0 - sum_r A_r v_r`` with ``A_r`` read off at ``t = T``.

    The coefficient drift over the final quarter is measured relative to
    ``max(|A_r|, floor * ||psi0|| / ||u_r||)`` so that vanishing coefficients
    do not trip the check.
    """
    return _decompose(psi0, ham, bases, T, dt, samples, drift_tol, strict, floor).phi


@dataclass
class CompletenessReport:
    coefficients: list
    phi0: np.ndarray = field(repr=False)
    phi0_drift: float
    remainder_times: np.ndarray
    remainder: np.ndarray
    wave_images: list
    stabilized: bool
    initial_norm: float
    warnings: list
    phi0_norm: float = 0.0

    def summary(self) -> dict:
        return {
            "coefficients": [
                {k: v for k, v in c.items() if k != "series"} for c in self.coefficients
            ],
            "phi0_l2": self.phi0_norm,
            "phi0_drift": self.phi0_drift,
            "remainder_times": self.remainder_times,
            "remainder": self.remainder,
            "wave_images": self.wave_images,
            "stabilized": self.stabilized,
            "initial_norm": self.initial_norm,
            "warnings": self.warnings,
        }


def remainder(ham: HamiltonianSpec, bases_coeffs: list, state: np.ndarray, phi0: np.ndarray,
              t: float, basis_lookup: dict) -> np.ndarray:
    """``R(t) = psi(t) - sum A_r (moving bound state) - exp(it Lap/2) phi0`` at one time."""
    out = np.array(state, dtype=complex)
    for c in bases_coeffs:
        u = basis_lookup[(c["channel"], c["index"])]
        out -= c["A"] * moving_bound_state(ham, c["channel"], u, c["eigenvalue"], t)
    out -= free_evolve(ham.grid, phi0, t, ham.kind, ham.mu if ham.kind == "matrix" else 0.0)
    return out


def asymptotic_decomposition(psi0: np.ndarray, ham: HamiltonianSpec, bases: Sequence[ChannelBasis], T: float,
                             dt: float, samples: int = 81, drift_tol: float = 0.05, strict: bool = True,
                             floor: float = 1e-2) -> CompletenessReport:
    """Bound-state coefficients, the free datum ``phi0`` and the remainder series."""
    grid = ham.grid
    dec = _decompose(psi0, ham, bases, T, dt, samples, drift_tol, strict, floor)
    traj = dec.trajectory
    kind = ham.kind
    mu = ham.mu if kind == "matrix" else 0.0
    scat = evolve(dec.phi, ham, 0.0, T, dt, samples=traj.times.size, record_norms=False)
    # free-frame pullback exp(-itLap/2) U(t) phi at the last quarter
    pulled = [free_evolve(grid, s, -t, kind, mu) for t, s in zip(scat.times, scat.states)]
    phi0 = pulled[-1]
    norm_phi0 = max(norm_lp(grid, phi0, 2), floor * norm_lp(grid, psi0, 2))
    last = [p for t, p in zip(scat.times, pulled) if t >= 0.75 * T - 1e-12]
    phi0_drift = max(norm_lp(grid, p - phi0, 2) for p in last) / norm_phi0
    # slow free-frame convergence (zero-energy resonances) is reported, never fatal
    warns = []
    if phi0_drift > drift_tol:
        warns.append(f"free-frame limit drifts by {phi0_drift:.3g} over the last quarter")
    lookup = {(cb.index, r): cb.basis.fields[r] for cb in bases for r in range(len(cb.basis))}
    rem = np.array([
        norm_lp(grid, remainder(ham, dec.coefficients, s, phi0, t, lookup), 2)
        for t, s in zip(traj.times, traj.states)
    ])
    warns += [img.warning for img in dec.images if img.warning]
    images = [
        {"channel": c["channel"], "index": c["index"], "l1": img.l1_norm, "l2": img.l2_norm,
         "cauchy_defect": img.cauchy_defect, "converged": img.converged}
        for c, img in zip(dec.coefficients, dec.images)
    ]
    stabilized = all(d <= drift_tol for d in dec.drifts)
    return CompletenessReport(dec.coefficients, phi0, float(phi0_drift), traj.times, rem, images,
                              stabilized, norm_lp(grid, psi0, 2), warns, norm_lp(grid, phi0, 2))
