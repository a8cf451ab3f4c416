"""Scenario-level orchestration shared by the command-line tools.

Each ``run_*`` function takes a :class:`ScenarioConfig` and returns a
:class:`RunResult` holding the report data plus any soft warnings.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .channels import asymptotic_decomposition, channel_bases, moving_bound_state, projection_decay_series
from .diagnostics import inhom_decay_check, kato_smoothing, linf_decay_check
from .model import Envelope, ScenarioConfig, ScenarioError, potential_fields
from .propagate import ForcingSpec, evolve, verify_translaw
from .spectral import norm_lp
from .spectrum import bound_states_scalar, check_admissibility, matrix_spectrum_dense

__all__ = [
    "RunResult",
    "make_rng",
    "initial_state",
    "forcing_from_params",
    "COMMANDS",
]


@dataclass
class RunResult:
    report: dict
    tables: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


@contextmanager
def _phase(timings: dict, name: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so that probe samples are reproducible across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def params(cfg: ScenarioConfig, name: str) -> dict:
    for d in cfg.diagnostics:
        if d.get("name") == name:
            return dict(d)
    return {}


def _vec(value, dim):
    arr = np.zeros(dim) if value is None else np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.concatenate([arr, np.zeros(dim - 1)])
    return arr


def _gaussian(grid, spec: dict) -> np.ndarray:
    c = _vec(spec.get("center"), grid.dim)
    k = _vec(spec.get("momentum"), grid.dim)
    w = float(spec.get("width", 1.0))
    amp = complex(spec.get("amplitude", 1.0))
    d = [x - ci for x, ci in zip(grid.x, c)]
    r2 = sum(a * a for a in d)
    phase = sum(ki * x for ki, x in zip(k, grid.x))
    return amp * np.exp(-0.5 * r2 / (w * w) + 1j * phase)


def initial_state(cfg: ScenarioConfig) -> np.ndarray:
    """Build the initial field from the scenario's ``initial`` recipe."""
    init = cfg.initial
    grid = cfg.grid
    ham = cfg.hamiltonian
    kind = init.get("kind", "gaussian")
    if kind == "gaussian":
        scalar = _gaussian(grid, init)
    elif kind == "packets":
        scalar = sum(_gaussian(grid, p) for p in init.get("packets", [])) + np.zeros(grid.shape, complex)
    elif kind == "zero":
        scalar = np.zeros(grid.shape, dtype=complex)
    elif kind == "file":
        try:
            data = np.load(init["path"])
        except (OSError, KeyError, ValueError) as exc:
            raise ScenarioError(f"cannot read initial state: {exc}") from None
        if data.shape != ham.field_shape():
            raise ScenarioError(f"initial state shape {data.shape} does not match {ham.field_shape()}")
        return _normalize(grid, data.astype(complex), init)
    elif kind == "bound_state":
        j, r = int(init.get("channel", 0)), int(init.get("index", 0))
        if j >= len(ham.potentials):
            raise ScenarioError(f"initial.channel {j} out of range")
        basis = _basis(ham.channel(j))
        if r >= len(basis):
            raise ScenarioError(f"channel {j} has {len(basis)} bound states, index {r} requested")
        u = moving_bound_state(ham, j, basis.fields[r], 0.0, 0.0)
        return _normalize(grid, u, init)
    else:
        raise ScenarioError(f"unknown initial kind {kind!r}")
    if ham.kind == "matrix":
        out = np.zeros((2,) + grid.shape, dtype=complex)
        out[int(init.get("component", 0))] = scalar
        return _normalize(grid, out, init)
    return _normalize(grid, scalar, init)


def _normalize(grid, f, init):
    if init.get("normalize", False):
        n = norm_lp(grid, f, 2)
        if n > 0:
            f = f / n
    return f


def _basis(ch):
    if ch.kind == "scalar":
        return bound_states_scalar(potential_fields(ch, 0.0), ch.grid)
    return matrix_spectrum_dense(ch)


def forcing_from_params(p: dict, dim: int, kind: str) -> ForcingSpec | None:
    """Forcing ``F = amplitude * exp(-rate t) * profile(x - center)`` from a diagnostics entry."""
    if "forcing" not in p:
        return None
    f = p["forcing"]
    comps = tuple(f.get("components", [1.0] if kind == "scalar" else [1.0, 0.0]))
    return ForcingSpec(
        shape=f.get("shape", "gaussian"),
        width=float(f.get("width", 1.0)),
        center=tuple(_vec(f.get("center"), dim)),
        envelope=Envelope(float(f.get("amplitude", 1.0)), float(f.get("rate", 1.0))),
        components=comps,
    )


def _norm_table(traj):
    header, rows = traj.csv_rows()
    return {"header": header, "rows": rows}


def _evolve(cfg, psi0, forcing=None, store=True):
    return evolve(psi0, cfg.hamiltonian, 0.0, cfg.T, cfg.dt, forcing=forcing,
                  samples=cfg.samples, store_states=store)


# --------------------------------------------------------------------------
# commands

def run_eig(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    ham = cfg.hamiltonian
    channels = []
    with _phase(res.timings, "solve"):
        for j in range(len(ham.potentials)):
            ch = ham.channel(j)
            basis = _basis(ch)
            entry = {
                "channel": j,
                "eigenvalues": [complex(z) for z in basis.eigenvalues],
                "residuals": basis.residuals.tolist(),
                "kinds": basis.kinds,
            }
            if ham.kind == "matrix" and ham.grid.dim == 1:
                entry["admissibility"] = check_admissibility(ch, seed=seed)
            channels.append(entry)
            if len(basis) and ham.grid.dim == 1:
                x = ham.grid.axis
                header, cols = ["x"], [x]
                for r in range(len(basis)):
                    f = basis.fields[r]
                    comps = [f] if ham.kind == "scalar" else [f[0], f[1]]
                    for c, comp in enumerate(comps):
                        header += [f"re_{r}_{c}", f"im_{r}_{c}"]
                        cols += [comp.real, comp.imag]
                res.tables[f"eigenfields_channel{j}"] = {"header": header, "rows": np.column_stack(cols).tolist()}
    res.report = {"kind": ham.kind, "channels": channels,
                  "eigenvalues": [z for c in channels for z in c["eigenvalues"]]}
    return res


def run_evolve(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    psi0 = initial_state(cfg)
    with _phase(res.timings, "evolve"):
        traj = _evolve(cfg, psi0, store=False)
    res.tables["norms"] = _norm_table(traj)
    final = {k: float(v[-1]) for k, v in traj.norms.items()}
    initial = {k: float(v[0]) for k, v in traj.norms.items()}
    res.report = {"T": cfg.T, "dt": cfg.dt, "initial_norms": initial, "final_norms": final}
    return res


def run_decay(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    p = params(cfg, "decay")
    psi0 = initial_state(cfg)
    with _phase(res.timings, "evolve"):
        traj = _evolve(cfg, psi0, store=False)
    window = tuple(p.get("window", (cfg.T / 8.0, cfg.T)))
    tol = float(p.get("tolerance", 0.05 if cfg.grid.dim == 1 else 0.15))
    with _phase(res.timings, "fit"):
        linf, mixed = linf_decay_check(traj, window, cfg.grid.dim, tol)
    res.tables["norms"] = _norm_table(traj)
    res.report = {"linf": linf, "l2plusLinf": mixed}
    if not linf.passed:
        res.warnings.append(f"L-infinity exponent {linf.exponent:.4f} outside {linf.theoretical}+-{tol}")
    return res


def _bases(cfg, res):
    with _phase(res.timings, "bases"):
        bases = channel_bases(cfg.hamiltonian)
    if not bases or all(len(b.basis) == 0 for b in bases):
        raise ScenarioError("scenario has no channel bound states")
    return bases


def run_channels(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    psi0 = initial_state(cfg)
    bases = _bases(cfg, res)
    with _phase(res.timings, "evolve"):
        traj = _evolve(cfg, psi0)
    with _phase(res.timings, "projections"):
        series = projection_decay_series(traj, cfg.hamiltonian, bases)
    header = ["t"] + [f"channel{s.channel}" for s in series]
    rows = np.column_stack([traj.times] + [s.values for s in series]).tolist()
    res.tables["projections"] = {"header": header, "rows": rows}
    res.report = {"series": [
        {"channel": s.channel, "rate": s.rate, "log_constant": s.log_constant,
         "residual": s.residual, "status": s.status,
         "initial": float(s.values[0]), "final": float(s.values[-1])} for s in series
    ]}
    return res


def run_complete(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    p = params(cfg, "complete")
    psi0 = initial_state(cfg)
    bases = channel_bases(cfg.hamiltonian)
    with _phase(res.timings, "decomposition"):
        rep = asymptotic_decomposition(psi0, cfg.hamiltonian, bases, cfg.T, cfg.dt,
                                       samples=cfg.samples, drift_tol=float(p.get("drift_tol", 0.05)),
                                       strict=False)
    res.tables["remainder"] = {"header": ["t", "remainder_l2"],
                               "rows": np.column_stack([rep.remainder_times, rep.remainder]).tolist()}
    res.report = rep.summary()
    res.warnings += rep.warnings
    if not rep.stabilized:
        res.warnings.append("bound-state coefficients not stabilized")
    return res


def run_kato(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    p = params(cfg, "kato")
    f = initial_state(cfg)
    with _phase(res.timings, "smoothing"):
        rep = kato_smoothing(cfg.hamiltonian, f, float(p.get("T", cfg.T)), float(p.get("R", 5.0)),
                             p.get("M", [4, 8, 16, 32]), cfg.dt)
    res.tables["smoothing"] = {"header": ["M", "value"], "rows": [[m, v] for m, v in zip(rep.M, rep.values)]}
    res.report = rep
    return res


def run_translaw(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    ham = cfg.hamiltonian
    if ham.kind != "matrix" or len(ham.potentials) != 1:
        raise ScenarioError("translaw needs a matrix scenario with exactly one potential")
    p = params(cfg, "translaw")
    t = float(p.get("t", cfg.T))
    psi0 = initial_state(cfg)
    pot = ham.potentials[0]
    out = {"t": t, "dt": cfg.dt}
    with _phase(res.timings, "split"):
        out["discrepancy_split"] = verify_translaw(cfg.grid, pot, psi0, t, cfg.dt, "split")
    if cfg.grid.dim == 1 and 2 * cfg.grid.n <= 4096:
        with _phase(res.timings, "exact"):
            e1 = verify_translaw(cfg.grid, pot, psi0, t, cfg.dt, "exact")
            e2 = verify_translaw(cfg.grid, pot, psi0, t, cfg.dt / 2, "exact")
        out.update(discrepancy_exact=e1, discrepancy_exact_half_dt=e2,
                   convergence_ratio=e1 / e2 if e2 > 0 else None)
    res.report = out
    return res


def run_inhom(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    p = params(cfg, "inhom")
    forcing = forcing_from_params(p, cfg.grid.dim, cfg.hamiltonian.kind)
    psi0 = initial_state(cfg)
    with _phase(res.timings, "evolve"):
        traj = _evolve(cfg, psi0, forcing)
    proj = []
    if cfg.hamiltonian.potentials:
        bases = channel_bases(cfg.hamiltonian)
        if any(len(b.basis) for b in bases):
            proj = [s.values for s in projection_decay_series(traj, cfg.hamiltonian, bases)]
    if not proj:
        proj = [np.zeros(len(traj.times))]
    with _phase(res.timings, "check"):
        rep = inhom_decay_check(traj, psi0, cfg.grid, forcing, proj, cfg.T, cfg.dt)
    res.tables["ratio"] = {"header": ["t", "r"], "rows": np.column_stack([rep.times, rep.ratio]).tolist()}
    res.tables["norms"] = _norm_table(traj)
    res.report = rep
    return res


def run_matrix_check(cfg: ScenarioConfig, seed: int) -> RunResult:
    res = RunResult({})
    ham = cfg.hamiltonian
    if ham.kind != "matrix":
        raise ScenarioError("matrix-check needs a matrix scenario")
    if not ham.potentials:
        rep = check_admissibility(ham, seed=seed)
        res.report = {"channels": [rep]}
        return res
    reports = []
    with _phase(res.timings, "admissibility"):
        for j in range(len(ham.potentials)):
            reports.append(check_admissibility(ham.channel(j), seed=seed))
    res.report = {"channels": reports}
    res.warnings += [f"channel {j}: not admissible ({', '.join(r.reasons)})"
                     for j, r in enumerate(reports) if not r.admissible]
    return res


COMMANDS = {
    "eig": run_eig,
    "evolve": run_evolve,
    "decay": run_decay,
    "channels": run_channels,
    "complete": run_complete,
    "kato": run_kato,
    "translaw": run_translaw,
    "inhom": run_inhom,
    "matrix-check": run_matrix_check,
}
