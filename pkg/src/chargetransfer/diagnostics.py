"""Quantitative probes of dispersive decay and of the estimates that support it."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .model import HamiltonianSpec
from .propagate import ForcingSpec, SplitStepper, Trajectory, free_evolve
from .spectral import (
    Grid,
    _modulus,
    fft,
    ifft,
    norm_l2_plus_linf,
    norm_l1_cap_l2,
    norm_lp,
    smooth_cutoff,
)
from .spectrum import Projector

__all__ = [
    "DecayReport",
    "SmoothingReport",
    "InhomReport",
    "bracket",
    "decay_fit",
    "kato_smoothing",
    "low_velocity_probe",
    "cancellation_probe",
    "fourier_l1",
    "local_l2_decay",
    "triple_norm_F",
    "projection_constant",
    "inhom_decay_check",
    "derivative_norm",
    "sobolev_norms",
    "derivative_decay_series",
    "linf_decay_check",
]


def bracket(t) -> np.ndarray:
    """``<t> = sqrt(1 + t^2)``."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(1.0 + t * t)


@dataclass
class DecayReport:
    norm: str
    window: tuple
    exponent: float
    constant: float
    residual: float
    theoretical: float
    dimension: int
    samples: int
    tolerance: float | None = None
    passed: bool | None = None
    status: str = "ok"


def decay_fit(
    times: Sequence[float],
    values: Sequence[float],
    window: tuple | None = None,
    theoretical_exponent: float = -0.5,
    tolerance: float | None = None,
    norm: str = "linf",
    dimension: int = 1,
    time_axis: str = "bracket",
) -> DecayReport:
    """Least squares of ``log value`` against ``log <t>`` (or ``log t`` with ``time_axis="plain"``)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    t, y = t[sel], y[sel]
    if t.size < 8:
        raise ValueError(f"decay fits need at least 8 samples in the window, got {t.size}")
    if np.any(y <= 0):
        raise ValueError("decay fits need positive samples")
    if time_axis == "bracket":
        s = np.log(bracket(t))
    elif time_axis == "plain":
        if np.any(t <= 0):
            raise ValueError("plain time axis needs t > 0")
        s = np.log(t)
    else:
        raise ValueError(f"time_axis must be 'bracket' or 'plain', got {time_axis!r}")
    A = np.column_stack([np.ones_like(s), s])
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(y)) ** 2)))
    exponent = float(coef[1])
    passed = None if tolerance is None else abs(exponent - theoretical_exponent) <= tolerance
    return DecayReport(norm, (float(window[0]), float(window[1])), exponent, float(np.exp(coef[0])),
                       resid, float(theoretical_exponent), int(dimension), int(t.size), tolerance, passed)


# --------------------------------------------------------------------------
# smoothing

@dataclass
class SmoothingReport:
    M: list
    values: list
    T: float
    R: float
    slope: float
    slope_residual: float
    monotone: bool


def _ball(grid: Grid, R: float) -> np.ndarray:
    if R >= 0.5 * grid.length:
        raise ValueError(f"ball radius {R} does not fit in the box of length {grid.length}")
    return grid.r <= R


def kato_smoothing(ham: HamiltonianSpec, f: np.ndarray, T: float, R: float, M_list: Sequence[float],
                   dt: float, width: float | None = None) -> SmoothingReport:
    """``int_0^T ||F(|p| >= M) exp(-itH) f||_{L^2(B_R)} dt`` per ``M`` and the log-log slope."""
    if ham.kind != "scalar" or not ham.is_static:
        raise ValueError("kato_smoothing needs a static scalar Hamiltonian")
    if len(M_list) < 3:
        raise ValueError("need at least three cutoff values")
    grid = ham.grid
    ball = _ball(grid, R)
    highs = [smooth_cutoff(M, width, "high").evaluate(grid) for M in M_list]
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T/dt must be an integer")
    stepper = SplitStepper(ham, dt)
    psi = np.array(f, dtype=complex)
    samples = np.zeros((n + 1, len(M_list)))

    def record(k, psi):
        spec = fft(grid, psi)
        for j, h in enumerate(highs):
            g = ifft(grid, h * spec)
            samples[k, j] = np.sqrt(np.sum(np.abs(g[ball]) ** 2) * grid.weight)

    record(0, psi)
    for k in range(1, n + 1):
        psi = stepper.step(psi, (k - 1) * dt)
        record(k, psi)
    values = trapezoid(samples, dx=dt, axis=0)
    logM, logv = np.log(np.asarray(M_list, float)), np.log(values)
    A = np.column_stack([np.ones_like(logM), logM])
    coef, *_ = np.linalg.lstsq(A, logv, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - logv) ** 2)))
    order = np.argsort(M_list)
    monotone = bool(np.all(np.diff(values[order]) <= 0))
    return SmoothingReport(list(map(float, M_list)), values.tolist(), float(T), float(R),
                           float(coef[1]), resid, monotone)


def low_velocity_probe(ham1: HamiltonianSpec, Pc: Projector, chi1: np.ndarray, M: float, A_window: float,
                       sample_fields: Sequence[np.ndarray], dt: float = 0.01, n_times: int = 9,
                       width: float | None = None) -> float:
    """Witness for ``sup_{0<=t-s<=A} ||chi_1 exp(-i(t-s)H_1) P_c F(|p|<=M)||``.

    Returns ``max ||chi1 exp(-i tau H1) P_c F(|p|<=M) g|| / ||g||`` over
    ``tau in [0, A_window]`` and the sample fields.
    """
    grid = ham1.grid
    low = smooth_cutoff(M, width, "low").evaluate(grid)
    taus = np.linspace(0.0, A_window, n_times)
    stepper = SplitStepper(ham1, dt)
    best = 0.0
    for g in sample_fields:
        base = norm_lp(grid, g, 2)
        if base == 0:
            continue
        psi = Pc.apply(ifft(grid, low * fft(grid, g)))
        done = 0.0
        for tau in taus:
            k = int(round((tau - done) / dt))
            psi = stepper.advance(psi, done, k)
            done += k * dt
            best = max(best, norm_lp(grid, chi1 * psi, 2) / base)
    return float(best)


# --------------------------------------------------------------------------
# cancellation

def fourier_l1(grid: Grid, V: np.ndarray) -> float:
    """``sum |V_hat_k| / N^dim``: the sup-norm bound of the Fourier series of ``V``."""
    return float(np.sum(np.abs(fft(grid, V))) / grid.size)


def cancellation_probe(grid: Grid, V: np.ndarray, s_list: Sequence[float], p, samples: Sequence[np.ndarray]) -> tuple[float, float]:
    """``max ||exp(is Lap/2) V exp(-is Lap/2) f||_p / ||f||_p`` and the constant ``||V_hat||_1``."""
    if p not in (1, np.inf, "inf"):
        raise ValueError("cancellation_probe supports p = 1 or inf")
    best = 0.0
    for s in s_list:
        for f in samples:
            # exp(is Lap/2) is the free flow over time s
            g = free_evolve(grid, V * free_evolve(grid, f, -s), s)
            best = max(best, norm_lp(grid, g, p) / norm_lp(grid, f, p))
    return float(best), fourier_l1(grid, V)


# --------------------------------------------------------------------------
# local decay

def rho(grid: Grid) -> np.ndarray:
    return np.sqrt(1.0 + grid.r ** 2)


def local_l2_decay(ham: HamiltonianSpec, Pc: Projector, eps: float, f: np.ndarray, times: Sequence[float],
                   dt: float = 0.01, eps0: float | None = None, window: tuple | None = None,
                   theoretical_exponent: float | None = None) -> tuple[DecayReport | None, np.ndarray]:
    """Series ``||E_eps exp(itA) P_c E_eps f||_2`` with ``E_eps = exp(-eps rho)``, and its decay fit."""
    if not ham.is_static:
        raise ValueError("local_l2_decay needs a static operator")
    if eps0 is None:
        eps0 = min((p.eps0 for p in ham.potentials), default=np.inf)
    if eps < 0 or eps >= eps0:
        raise ValueError(f"eps must lie in [0, eps0={eps0:g})")
    grid = ham.grid
    E = np.exp(-eps * rho(grid))
    times = np.asarray(sorted(times), dtype=float)
    stepper = SplitStepper(ham, -dt)
    psi = Pc.apply(E * np.asarray(f, dtype=complex))
    done = 0.0
    vals = []
    for t in times:
        k = int(round((t - done) / dt))
        psi = stepper.advance(psi, -done, k)
        done += k * dt
        vals.append(norm_lp(grid, E * psi, 2))
    vals = np.array(vals)
    target = -0.5 * grid.dim if theoretical_exponent is None else theoretical_exponent
    report = None
    if np.all(vals > 0) and len(times) >= 8:
        report = decay_fit(times, vals, window, target, None, "weighted-l2", grid.dim)
    return report, vals


# --------------------------------------------------------------------------
# forcing

def triple_norm_F(forcing: ForcingSpec | Callable, grid: Grid, T: float, dt: float) -> float:
    """``sup_t { int_0^t ||F||_1 + <t>^{n/2+1} ||F(t)||_2 }`` on ``t = 0, dt, ..., T``."""
    n = int(round(T / dt))
    ts = np.linspace(0.0, n * dt, n + 1)
    l1 = np.array([norm_lp(grid, forcing(grid, t), 1) for t in ts])
    l2 = np.array([norm_lp(grid, forcing(grid, t), 2) for t in ts])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (l1[1:] + l1[:-1]))])
    return float(np.max(cum + bracket(ts) ** (0.5 * grid.dim + 1.0) * l2))


def projection_constant(times: np.ndarray, projection_norms: Sequence[np.ndarray], dim: int) -> float:
    """Smallest ``B`` with ``sum_j ||P_b(H_j,t) psi(t)|| <= B <t>^{-n/2}`` on the samples."""
    total = np.sum(np.asarray(projection_norms, dtype=float), axis=0)
    return float(np.max(bracket(times) ** (0.5 * dim) * total))


@dataclass
class InhomReport:
    times: np.ndarray
    ratio: np.ndarray
    sup_ratio: float
    trend: float
    data_norm: float
    forcing_norm: float
    B: float
    dimension: int


def inhom_decay_check(trajectory: Trajectory, psi0: np.ndarray, grid: Grid, forcing: ForcingSpec | None,
                      projection_norms: Sequence[np.ndarray] | None, T: float | None = None,
                      dt: float | None = None) -> InhomReport:
    """``r(t) = <t>^{n/2} ||psi(t)||_{L2+Linf} / (||psi0||_{L1 cap L2} + |||F||| + B)``.

    ``trend`` is the least-squares slope of ``r`` over the second half of the samples.
    """
    if projection_norms is None:
        raise ValueError("inhom_decay_check needs the projection series")
    times = np.asarray(trajectory.times)
    if "l2plusLinf" in trajectory.norms:
        num = np.asarray(trajectory.norms["l2plusLinf"])
    else:
        num = np.array([norm_l2_plus_linf(grid, s)[0] for s in trajectory.states])
    T = float(times[-1]) if T is None else T
    dt = trajectory.dt if dt is None else dt
    tri = 0.0 if forcing is None else triple_norm_F(forcing, grid, T, dt)
    B = projection_constant(times, projection_norms, grid.dim)
    data = norm_l1_cap_l2(grid, psi0)
    ratio = bracket(times) ** (0.5 * grid.dim) * num / (data + tri + B)
    half = times >= 0.5 * times[-1]
    trend = float(np.polyfit(times[half], ratio[half], 1)[0]) if half.sum() >= 2 else 0.0
    return InhomReport(times, ratio, float(ratio.max()), trend, data, tri, B, grid.dim)


# --------------------------------------------------------------------------
# graded norms

def derivative_norm(grid: Grid, field: np.ndarray, k: int) -> np.ndarray:
    """All ``k``-th partial derivatives stacked on leading axes (spectral, Nyquist zeroed)."""
    spec = fft(grid, field)
    ik = [np.where(grid.nyquist_mask, 0.0, 1j * kk) for kk in grid.k]
    terms = [spec]
    for _ in range(k):
        terms = [t * s for t in terms for s in ik]
    return np.stack([ifft(grid, t) for t in terms])


def _hs_norm(grid: Grid, field: np.ndarray, s: int) -> float:
    spec = fft(grid, field)
    w = (1.0 + grid.k2) ** s
    return float(np.sqrt(np.sum(w * np.abs(spec) ** 2) * grid.weight / grid.size))


def _l2_linf_tensor(grid: Grid, tensor: np.ndarray) -> float:
    flat = tensor.reshape((-1,) + grid.shape)
    return norm_l2_plus_linf(grid, flat)[0]


def sobolev_norms(grid: Grid, times: Sequence[float], fields: Sequence[np.ndarray], s: int,
                  kind: str = "X", dt: float | None = None) -> float:
    """Graded norms with weights ``(1 + t)``.

    ``kind="X"``: ``sup_t ||psi||_{H^s} + (1+t)^{n/2} sum_{k<=s} ||grad^k psi||_{L2+Linf}``.
    ``kind="Y"``: ``sup_t sum_{k<=s} int_0^t ||grad^k F||_1 + (1+t)^{n/2+1} ||grad^k F(t)||_2``
    (time integral by the trapezoid rule on the given samples).
    """
    if s not in (0, 1, 2):
        raise ValueError("s must be 0, 1 or 2")
    times = np.asarray(times, dtype=float)
    n = grid.dim
    if kind == "X":
        best = 0.0
        for t, f in zip(times, fields):
            dec = sum(_l2_linf_tensor(grid, derivative_norm(grid, f, k)) for k in range(s + 1))
            best = max(best, _hs_norm(grid, f, s) + (1.0 + t) ** (0.5 * n) * dec)
        return float(best)
    if kind == "Y":
        l1 = np.zeros((len(times), s + 1))
        l2 = np.zeros((len(times), s + 1))
        for i, f in enumerate(fields):
            for k in range(s + 1):
                D = derivative_norm(grid, f, k).reshape((-1,) + grid.shape)
                a = _modulus(grid, D)
                l1[i, k] = np.sum(a) * grid.weight
                l2[i, k] = np.sqrt(np.sum(a * a) * grid.weight)
        cum = np.zeros_like(l1)
        if len(times) > 1:
            steps = np.diff(times)[:, None]
            cum[1:] = np.cumsum(0.5 * steps * (l1[1:] + l1[:-1]), axis=0)
        total = np.sum(cum + (1.0 + times[:, None]) ** (0.5 * n + 1.0) * l2, axis=1)
        return float(total.max())
    raise ValueError("kind must be 'X' or 'Y'")


def derivative_decay_series(grid: Grid, fields: Sequence[np.ndarray], k: int) -> np.ndarray:
    """``||grad^k psi(t)||_{L2+Linf}`` per sample."""
    return np.array([_l2_linf_tensor(grid, derivative_norm(grid, f, k)) for f in fields])


def linf_decay_check(trajectory: Trajectory, window: tuple | None = None, dimension: int = 1,
                     tolerance: float = 0.15) -> tuple[DecayReport, DecayReport]:
    """Fits of ``||psi||_inf`` and ``||psi||_{L2+Linf}`` against ``<t>^{-n/2}``.

    The first report is flagged when the data does not decay (for example a
    bound state, which is not a scattering state).
    """
    target = -0.5 * dimension
    t = trajectory.times
    linf = decay_fit(t, trajectory.norms["linf"], window, target, tolerance, "linf", dimension)
    mixed = decay_fit(t, trajectory.norms["l2plusLinf"], window, target, tolerance, "l2plusLinf", dimension)
    if linf.exponent > target + tolerance:
        linf.status = "fails decay (not a scattering state)"
    return linf, mixed
