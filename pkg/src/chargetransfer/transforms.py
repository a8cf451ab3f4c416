"""Galilei boosts and modulations, and the moving projections they induce.

The boost is applied literally as the product

    g_{v,y}(t) = exp(-i |v|^2 t / 2) * exp(-i x.v) * exp(i (y + t v).p),   p = -i grad,

read right to left: the translation ``f(x) -> f(x + y + t v)`` acts first
and the two phases follow.  With this reading
``g_v(t)^{-1} exp(-itH) g_v(0)`` solves the equation with the potential
moved to ``x - t v - y`` (checked numerically in the test suite).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .spectral import Grid, translate

__all__ = [
    "galilei",
    "galilei_inverse",
    "matrix_galilei",
    "matrix_galilei_inverse",
    "modulation",
    "modulation_inverse",
    "frame",
    "frame_inverse",
    "moving_projection",
]


def _vec(grid: Grid, v) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1 and grid.dim > 1:
        v = np.concatenate([v, np.zeros(grid.dim - 1)])
    if v.size != grid.dim:
        raise ValueError(f"vector {v} does not match grid dimension {grid.dim}")
    return v


def _plane_wave(grid: Grid, v: np.ndarray) -> np.ndarray:
    return np.exp(-1j * sum(vi * xi for vi, xi in zip(v, grid.x)))


def galilei(grid: Grid, field: np.ndarray, v, t: float, y=None) -> np.ndarray:
    """Apply ``g_{v,y}(t)`` to a scalar field.

    On the periodic box the plane wave is periodic only for ``v`` on the
    frequency lattice ``2 pi Z^d / L``; off-lattice velocities keep the map
    unitary but break the exact inverse and intertwining identities.
    """
    v = _vec(grid, v)
    y = np.zeros(grid.dim) if y is None else _vec(grid, y)
    if not np.any(v) and not np.any(y):
        return np.array(field, dtype=complex)
    shifted = translate(grid, field, y + t * v)
    return np.exp(-0.5j * float(v @ v) * t) * _plane_wave(grid, v) * shifted


def galilei_inverse(grid: Grid, field: np.ndarray, v, t: float, y=None) -> np.ndarray:
    """``g_{v,y}(t)^{-1} = exp(-i y.v) g_{-v,-y}(t)``."""
    v = _vec(grid, v)
    y = np.zeros(grid.dim) if y is None else _vec(grid, y)
    return np.exp(-1j * float(y @ v)) * galilei(grid, field, -v, t, -y)


def _spinor(field: np.ndarray, grid: Grid) -> None:
    if field.ndim != grid.dim + 1 or field.shape[0] != 2:
        raise ValueError(f"expected a 2-component field, got shape {field.shape}")


def matrix_galilei(grid: Grid, spinor: np.ndarray, v, t: float, y=None) -> np.ndarray:
    """``(g psi_1, conj(g conj(psi_2)))``."""
    _spinor(spinor, grid)
    out = np.empty(spinor.shape, dtype=complex)
    out[0] = galilei(grid, spinor[0], v, t, y)
    out[1] = np.conj(galilei(grid, np.conj(spinor[1]), v, t, y))
    return out


def matrix_galilei_inverse(grid: Grid, spinor: np.ndarray, v, t: float, y=None) -> np.ndarray:
    _spinor(spinor, grid)
    out = np.empty(spinor.shape, dtype=complex)
    out[0] = galilei_inverse(grid, spinor[0], v, t, y)
    out[1] = np.conj(galilei_inverse(grid, np.conj(spinor[1]), v, t, y))
    return out


def _omega(alpha: float, gamma: float, t: float) -> float:
    return alpha * alpha * t + gamma


def modulation(spinor: np.ndarray, alpha: float, gamma: float, t: float) -> np.ndarray:
    """``diag(exp(-i w/2), exp(i w/2))`` with ``w = alpha^2 t + gamma``."""
    if spinor.shape[0] != 2:
        raise ValueError("modulation acts on 2-component fields")
    w = _omega(alpha, gamma, t)
    out = np.empty(spinor.shape, dtype=complex)
    out[0] = np.exp(-0.5j * w) * spinor[0]
    out[1] = np.exp(0.5j * w) * spinor[1]
    return out


def modulation_inverse(spinor: np.ndarray, alpha: float, gamma: float, t: float) -> np.ndarray:
    w = _omega(alpha, gamma, t)
    out = np.empty(spinor.shape, dtype=complex)
    out[0] = np.exp(0.5j * w) * spinor[0]
    out[1] = np.exp(-0.5j * w) * spinor[1]
    return out


def frame(grid: Grid, field: np.ndarray, kind: str, velocity, t: float,
          alpha: float = 0.0, gamma: float = 0.0) -> np.ndarray:
    """Map a lab-frame state into the static frame of one channel.

    Scalar: ``g_v(t)``.  Matrix: ``M(t) G_v(t)``.
    """
    if kind == "scalar":
        return galilei(grid, field, velocity, t)
    return modulation(matrix_galilei(grid, field, velocity, t), alpha, gamma, t)


def frame_inverse(grid: Grid, field: np.ndarray, kind: str, velocity, t: float,
                  alpha: float = 0.0, gamma: float = 0.0) -> np.ndarray:
    if kind == "scalar":
        return galilei_inverse(grid, field, velocity, t)
    return matrix_galilei_inverse(grid, modulation_inverse(field, alpha, gamma, t), velocity, t)


def moving_projection(projector, kind: str, velocity, t: float,
                      alpha: float = 0.0, gamma: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Conjugate a static projection into the moving frame of its potential.

    Returns ``f -> frame^{-1} P frame f``; ``projector`` needs ``grid`` and ``apply``.
    """
    grid = projector.grid

    def apply(f: np.ndarray) -> np.ndarray:
        g = frame(grid, f, kind, velocity, t, alpha, gamma)
        return frame_inverse(grid, projector.apply(g), kind, velocity, t, alpha, gamma)

    return apply
