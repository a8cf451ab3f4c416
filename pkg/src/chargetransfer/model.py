"""Moving potentials and the scenario files that assemble them into Hamiltonians."""
from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from .spectral import Grid, make_grid

__all__ = [
    "WraparoundWarning",
    "PotentialSpec",
    "Envelope",
    "Perturbation",
    "HamiltonianSpec",
    "ScenarioConfig",
    "SCENARIO_SCHEMA",
    "ScenarioError",
    "profile",
    "profile_radius",
    "sample_profile",
    "sample_scalar_potential",
    "matrix_phase",
    "sample_matrix_potential",
    "potential_fields",
    "build_hamiltonian",
    "load_scenario",
    "scenario_from_dict",
    "save_report",
    "to_jsonable",
    "wraparound_fraction",
    "guard_margin",
]

SHAPES = ("gaussian", "sech2", "compact-bump")


class WraparoundWarning(UserWarning):
    """A sampled potential is not negligible at the edge of the periodic box."""


class ScenarioError(ValueError):
    """Raised for malformed scenario documents."""


@dataclass(frozen=True)
class PotentialSpec:
    """One moving (and, for matrix models, modulated) potential.

    ``amplitude`` scales the diagonal profile ``U``; ``w_amplitude`` scales the
    off-diagonal profile ``W`` of matrix models.  ``decay_rate`` is the
    exponential localisation rate assumed for the channel's bound states.
    """

    shape: str = "sech2"
    amplitude: float = -1.0
    width: float = 1.0
    center: tuple[float, ...] = (0.0,)
    velocity: tuple[float, ...] = (0.0,)
    alpha: float = 0.0
    gamma: float = 0.0
    w_amplitude: float = 0.0
    decay_rate: float | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown potential shape {self.shape!r}; expected one of {SHAPES}")
        if not self.width > 0:
            raise ValueError("potential width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "velocity", tuple(float(c) for c in np.atleast_1d(self.velocity)))
        if len(self.center) != len(self.velocity):
            raise ValueError("center and velocity must have the same dimension")
        if self.decay_rate is not None and not self.decay_rate > 0:
            raise ValueError("decay_rate must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def eps0(self) -> float:
        return self.decay_rate if self.decay_rate is not None else 1.0 / self.width

    @property
    def mu(self) -> float:
        """Kinetic shift of the static matrix channel operator."""
        return 0.5 * self.alpha ** 2

    def static(self) -> "PotentialSpec":
        """The potential frozen at its initial position, without phase or modulation.

        In a matrix model this is the potential of the channel operator
        ``A = B + V`` with real coupling ``W``; the kinetic shift ``alpha^2/2``
        moves into :attr:`HamiltonianSpec.mu`.
        """
        return PotentialSpec(
            self.shape, self.amplitude, self.width, self.center, (0.0,) * self.dim,
            0.0, 0.0, self.w_amplitude, self.decay_rate,
        )


def profile(shape: str, r: np.ndarray, width: float) -> np.ndarray:
    """Unit-height radial profile."""
    s = np.asarray(r) / width
    if shape == "gaussian":
        return np.exp(-0.5 * s * s)
    if shape == "sech2":
        # exp form avoids cosh overflow far from the centre
        e = np.exp(-2.0 * np.abs(s))
        return 4.0 * e / (1.0 + e) ** 2
    if shape == "compact-bump":
        return np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** 3, 0.0)
    raise ValueError(f"unknown shape {shape!r}")


def profile_radius(shape: str, width: float, level: float = 1e-10) -> float:
    """Radius beyond which the unit profile stays below ``level``."""
    if shape == "gaussian":
        return width * math.sqrt(2.0 * math.log(1.0 / level))
    if shape == "sech2":
        return width * 0.5 * math.log(4.0 / level)
    return width


def _displacement(grid: Grid, center: Sequence[float]) -> list[np.ndarray]:
    """Periodised ``x - center`` reduced to ``[-L/2, L/2)`` per axis."""
    L = grid.length
    return [np.mod(x - c + 0.5 * L, L) - 0.5 * L for x, c in zip(grid.x, center)]


def sample_profile(grid: Grid, shape: str, width: float, position: Sequence[float]) -> np.ndarray:
    d = _displacement(grid, position)
    r = np.sqrt(sum(c * c for c in d))
    return profile(shape, r, width)


def position(spec: PotentialSpec, t: float) -> np.ndarray:
    return np.asarray(spec.center) + t * np.asarray(spec.velocity)


def wraparound_fraction(grid: Grid, values: np.ndarray) -> float:
    """Fraction of ``sum |V|`` lying outside the central half-box."""
    a = np.abs(values)
    while a.ndim > grid.dim:
        a = a.sum(axis=0)
    total = a.sum()
    if total == 0:
        return 0.0
    inside = np.ones(grid.shape, dtype=bool)
    for x in grid.x:
        inside &= np.abs(x) <= 0.25 * grid.length
    return float(a[~inside].sum() / total)


def _edge_max(grid: Grid, values: np.ndarray) -> float:
    a = np.abs(values)
    while a.ndim > grid.dim:
        a = a.max(axis=0)
    edge = np.zeros(grid.shape, dtype=bool)
    for x in grid.x:
        edge |= np.isclose(np.abs(x), 0.5 * grid.length) | (x == grid.axis[0])
    return float(a[edge].max())


def _guard(grid: Grid, values: np.ndarray, scale: float, t: float) -> None:
    if scale and _edge_max(grid, values) > 1e-10 * abs(scale):
        warnings.warn(
            f"potential exceeds 1e-10 of its amplitude at the box edge at t={t:g}",
            WraparoundWarning,
            stacklevel=3,
        )


def sample_scalar_potential(spec: PotentialSpec, grid: Grid, t: float = 0.0) -> np.ndarray:
    """Samples of ``V(x - center - v t)``; warns if the box edge is not clear."""
    if spec.dim != grid.dim:
        raise ValueError("potential and grid dimensions differ")
    V = spec.amplitude * sample_profile(grid, spec.shape, spec.width, position(spec, t))
    _guard(grid, V, spec.amplitude, t)
    return V


def matrix_phase(spec: PotentialSpec, t: float, x) -> np.ndarray:
    """``theta(t, x) = (|v|^2 + alpha^2) t + 2 x.v + gamma``; ``x`` is a sequence of axis arrays."""
    v = np.asarray(spec.velocity)
    vx = sum(vi * np.asarray(xi) for vi, xi in zip(v, x))
    return (float(v @ v) + spec.alpha ** 2) * t + 2.0 * vx + spec.gamma


def sample_matrix_potential(spec: PotentialSpec, grid: Grid, t: float = 0.0) -> np.ndarray:
    """2x2 matrix potential, shape ``(2, 2, *grid.shape)``.

    Profiles sit at ``x - center - v t``; the off-diagonal phase is evaluated
    at ``x - v t`` so that a boost plus modulation maps the entry onto the
    static channel operator with real coupling ``W``.
    """
    if spec.alpha == 0:
        raise ValueError("matrix potentials require alpha != 0")
    if spec.dim != grid.dim:
        raise ValueError("potential and grid dimensions differ")
    base = sample_profile(grid, spec.shape, spec.width, position(spec, t))
    U = spec.amplitude * base
    W = spec.w_amplitude * base
    v = np.asarray(spec.velocity)
    theta = matrix_phase(spec, t, [x - vi * t for x, vi in zip(grid.x, v)])
    out = np.empty((2, 2) + grid.shape, dtype=complex)
    out[0, 0] = U
    out[0, 1] = -np.exp(1j * theta) * W
    out[1, 0] = np.exp(-1j * theta) * W
    out[1, 1] = -U
    _guard(grid, base, max(abs(spec.amplitude), abs(spec.w_amplitude)), t)
    return out


@dataclass(frozen=True)
class Envelope:
    """Time envelope ``a * exp(-rate t)`` (``rate = 0`` gives a constant)."""

    amplitude: float = 1.0
    rate: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude * math.exp(-self.rate * t)


@dataclass(frozen=True)
class Perturbation:
    """Small perturbation ``V0(t, x) = envelope(t) * profile(x)``.

    ``eps`` is the stored sup-norm bound; the hypothesis
    ``sup_t ||V0(t)|| < eps`` is checked on construction.
    """

    potential: PotentialSpec
    envelope: Envelope = Envelope()
    eps: float = 1.0

    def __post_init__(self):
        peak = abs(self.potential.amplitude * self.envelope.amplitude)
        if peak >= self.eps:
            raise ValueError(f"perturbation sup-norm {peak:g} is not below eps={self.eps:g}")

    def sample(self, grid: Grid, t: float) -> np.ndarray:
        return self.envelope(t) * sample_scalar_potential(self.potential, grid, t)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Full charge transfer model.

    Scalar: ``-Lap/2 + sum_j V_j(x - v_j t) (+ V0)``.
    Matrix: ``diag(-Lap/2 + mu, Lap/2 - mu) + sum_j V_j(t)`` with ``V0`` entering as ``diag(V0, -V0)``.
    """

    grid: Grid
    kind: str = "scalar"
    mu: float = 0.0
    potentials: tuple[PotentialSpec, ...] = ()
    perturbation: Perturbation | None = None

    @property
    def components(self) -> int:
        return 1 if self.kind == "scalar" else 2

    @property
    def is_static(self) -> bool:
        if self.perturbation is not None and self.perturbation.envelope.rate != 0:
            return False
        if any(any(p.velocity) for p in self.potentials):
            return False
        if self.kind == "matrix":
            return all(p.alpha == 0 or p.w_amplitude == 0 for p in self.potentials)
        return True

    def field_shape(self) -> tuple[int, ...]:
        return self.grid.shape if self.kind == "scalar" else (2,) + self.grid.shape

    def channel(self, index: int) -> "HamiltonianSpec":
        """Static single-potential Hamiltonian of channel ``index``."""
        if not 0 <= index < len(self.potentials):
            raise IndexError(f"channel index {index} out of range")
        p = self.potentials[index]
        mu = p.mu if self.kind == "matrix" else 0.0
        return HamiltonianSpec(self.grid, self.kind, mu, (p.static(),))

    def without(self, index: int) -> "HamiltonianSpec":
        pots = tuple(p for i, p in enumerate(self.potentials) if i != index)
        return HamiltonianSpec(self.grid, self.kind, self.mu, pots, self.perturbation)


def potential_fields(ham: HamiltonianSpec, t: float) -> np.ndarray:
    """Total potential at time ``t``: real array (scalar) or ``(2, 2, ...)`` (matrix)."""
    g = ham.grid
    if ham.kind == "scalar":
        V = np.zeros(g.shape)
        for p in ham.potentials:
            V = V + sample_scalar_potential(p, g, t)
        if ham.perturbation is not None:
            V = V + ham.perturbation.sample(g, t)
        return V
    V = np.zeros((2, 2) + g.shape, dtype=complex)
    for p in ham.potentials:
        if p.alpha == 0:
            # static channel potential [[U, -W], [W, -U]]
            base = sample_profile(g, p.shape, p.width, position(p, t))
            _guard(g, base, max(abs(p.amplitude), abs(p.w_amplitude)), t)
            V[0, 0] += p.amplitude * base
            V[1, 1] -= p.amplitude * base
            V[0, 1] -= p.w_amplitude * base
            V[1, 0] += p.w_amplitude * base
        else:
            V += sample_matrix_potential(p, g, t)
    if ham.perturbation is not None:
        V0 = ham.perturbation.sample(g, t)
        V[0, 0] += V0
        V[1, 1] -= V0
    return V


def build_hamiltonian(
    grid: Grid,
    kind: str = "scalar",
    mu: float = 0.0,
    potentials: Sequence[PotentialSpec] = (),
    perturbation: Perturbation | None = None,
) -> HamiltonianSpec:
    if kind not in ("scalar", "matrix"):
        raise ValueError(f"kind must be 'scalar' or 'matrix', got {kind!r}")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    potentials = tuple(potentials)
    for p in potentials:
        if p.dim != grid.dim:
            raise ValueError(f"potential dimension {p.dim} does not match grid dimension {grid.dim}")
    vel = [p.velocity for p in potentials]
    if len(set(vel)) != len(vel):
        raise ValueError("potential velocities must be pairwise distinct")
    return HamiltonianSpec(grid, kind, float(mu), potentials, perturbation)


def guard_margin(ham: HamiltonianSpec, T: float) -> float:
    """Half box length minus the space a run of length ``T`` needs.

    Negative means the wraparound guard is violated.
    """
    need = 0.0
    for p in ham.potentials:
        travel = float(np.linalg.norm(np.asarray(p.center) + T * np.asarray(p.velocity)))
        travel = max(travel, float(np.linalg.norm(p.center)))
        need = max(need, travel + profile_radius(p.shape, p.width) + 4.0 * math.sqrt(T))
    return 0.5 * ham.grid.length - need


# --------------------------------------------------------------------------
# scenario files

_NUM = {"type": "number"}
_VEC = {"anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 3}]}

_POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["shape"],
    "properties": {
        "shape": {"enum": list(SHAPES)},
        "amplitude": _NUM,
        "width": _NUM,
        "center": _VEC,
        "velocity": _VEC,
        "alpha": _NUM,
        "gamma": _NUM,
        "W_amplitude": _NUM,
        "decay_rate": _NUM,
    },
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["grid", "model", "time"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dim", "n", "length"],
            "properties": {
                "dim": {"enum": [1, 2, 3]},
                "n": {"type": "integer"},
                "length": _NUM,
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["scalar", "matrix"]},
                "mu": _NUM,
                "potentials": {"type": "array", "items": _POTENTIAL_SCHEMA},
                "perturbation": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["potential", "eps"],
                    "properties": {
                        "potential": _POTENTIAL_SCHEMA,
                        "envelope": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {"amplitude": _NUM, "rate": _NUM},
                        },
                        "eps": _NUM,
                    },
                },
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian", "packets", "bound_state", "file", "zero"]},
                "center": _VEC,
                "width": _NUM,
                "momentum": _VEC,
                "amplitude": _NUM,
                "component": {"enum": [0, 1]},
                "packets": {"type": "array", "items": {"type": "object"}},
                "channel": {"type": "integer", "minimum": 0},
                "index": {"type": "integer", "minimum": 0},
                "path": {"type": "string"},
                "normalize": {"type": "boolean"},
            },
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T", "dt"],
            "properties": {"T": _NUM, "dt": _NUM, "samples": {"type": "integer", "minimum": 2}},
        },
        "diagnostics": {
            "type": "array",
            "items": {"type": "object", "required": ["name"], "properties": {"name": {"type": "string"}}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"}},
        },
    },
}

_DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "seed": 0,
    "initial": {"kind": "gaussian", "width": 1.0, "amplitude": 1.0},
    "diagnostics": [],
    "output": {"csv": "norms.csv", "json": "report.json"},
}


@dataclass
class ScenarioConfig:
    grid: Grid
    hamiltonian: HamiltonianSpec
    initial: dict
    T: float
    dt: float
    samples: int
    diagnostics: list
    output: dict
    name: str = "scenario"
    seed: int = 0
    source: dict = field(default_factory=dict, repr=False)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.source)


def _vec(value, dim: int) -> tuple[float, ...]:
    if value is None:
        return (0.0,) * dim
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.concatenate([arr, np.zeros(dim - 1)])
    if arr.size != dim:
        raise ScenarioError(f"vector {value!r} does not have dimension {dim}")
    return tuple(arr.tolist())


def _potential_from_dict(d: dict, dim: int) -> PotentialSpec:
    return PotentialSpec(
        shape=d["shape"],
        amplitude=float(d.get("amplitude", -1.0)),
        width=float(d.get("width", 1.0)),
        center=_vec(d.get("center"), dim),
        velocity=_vec(d.get("velocity"), dim),
        alpha=float(d.get("alpha", 0.0)),
        gamma=float(d.get("gamma", 0.0)),
        w_amplitude=float(d.get("W_amplitude", 0.0)),
        decay_rate=d.get("decay_rate"),
    )


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario schema error at {where}: {exc.message}") from None
    full = copy.deepcopy(_DEFAULTS)
    for key, value in doc.items():
        full[key] = copy.deepcopy(value)
    g = full["grid"]
    try:
        grid = make_grid(g["dim"], g["n"], g["length"])
        model = full["model"]
        pots = [_potential_from_dict(p, grid.dim) for p in model.get("potentials", [])]
        pert = None
        if "perturbation" in model:
            pd = model["perturbation"]
            env = pd.get("envelope", {})
            pert = Perturbation(
                _potential_from_dict(pd["potential"], grid.dim),
                Envelope(float(env.get("amplitude", 1.0)), float(env.get("rate", 0.0))),
                float(pd["eps"]),
            )
        ham = build_hamiltonian(grid, model["kind"], float(model.get("mu", 0.0)), pots, pert)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    T, dt = float(full["time"]["T"]), float(full["time"]["dt"])
    if not (T > 0 and dt > 0):
        raise ScenarioError("time.T and time.dt must be positive")
    if abs(T / dt - round(T / dt)) > 1e-9 * max(1.0, T / dt):
        raise ScenarioError(f"T/dt must be an integer (T={T}, dt={dt})")
    full["time"].setdefault("samples", 41)
    cfg = ScenarioConfig(
        grid=grid,
        hamiltonian=ham,
        initial=full["initial"],
        T=T,
        dt=dt,
        samples=int(full["time"]["samples"]),
        diagnostics=list(full["diagnostics"]),
        output=dict(full["output"]),
        name=str(full["name"]),
        seed=int(full["seed"]),
        source=full,
    )
    if ham.potentials and guard_margin(ham, T) < 0:
        warnings.warn(
            f"scenario {cfg.name!r}: box too small for the wraparound guard over T={T:g}",
            WraparoundWarning,
            stacklevel=2,
        )
    return cfg


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc)


def to_jsonable(obj):
    """Convert dataclasses, numpy scalars/arrays and complex numbers for JSON."""
    if hasattr(obj, "__dataclass_fields__"):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _fmt(obj.real), "im": _fmt(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _fmt(x) -> float | str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return str(x)
    return float(f"{x:.17g}")


def save_report(report, path) -> Path:
    """Write a report (dataclass or dict) as deterministic JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
