"""Periodic grids with their Fourier multipliers and the norms used throughout.

Fields are plain ``numpy`` arrays.  A scalar field has ``grid.shape``; a
spinor has shape ``(2, *grid.shape)``.  The discrete transform is
``numpy.fft.fftn`` with no prefactor on the forward side and ``1/N**dim`` on
the inverse, so quadrature weights appear explicitly in Parseval.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "MultiplierSymbol",
    "make_grid",
    "fft",
    "ifft",
    "apply_multiplier",
    "smooth_cutoff",
    "sharp_cutoff",
    "derivative_symbol",
    "translate",
    "spectral_l2",
    "inner",
    "norm_lp",
    "norm_l2_plus_linf",
    "l2_plus_linf_objective",
    "norm_l1_cap_l2",
    "gradient",
]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box ``[-L/2, L/2)^dim`` with ``n`` points per axis."""

    dim: int
    n: int
    length: float

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def weight(self) -> float:
        """Quadrature weight of one cell."""
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def volume(self) -> float:
        return self.length ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.n)

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def r(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.x))

    @cached_property
    def frequencies(self) -> np.ndarray:
        """1D lattice 2*pi*k/L in FFT order, k in [-n/2, n/2)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.frequencies] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(c * c for c in self.k)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True where any frequency component sits on the Nyquist mode."""
        nyq = self.n // 2
        idx = np.meshgrid(*([np.arange(self.n)] * self.dim), indexing="ij")
        mask = np.zeros(self.shape, dtype=bool)
        for i in idx:
            mask |= i == nyq
        return mask

    def check(self, field: np.ndarray) -> None:
        if field.shape[-self.dim:] != self.shape:
            raise ValueError(
                f"field shape {field.shape} does not match grid shape {self.shape}"
            )


def make_grid(dim: int, points_per_dim: int, box_length: float) -> Grid:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if not _is_power_of_two(int(points_per_dim)) or points_per_dim < 4:
        raise ValueError(f"points_per_dim must be a power of two >= 4, got {points_per_dim}")
    if not box_length > 0:
        raise ValueError(f"box_length must be positive, got {box_length}")
    return Grid(int(dim), int(points_per_dim), float(box_length))


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(-grid.dim, 0))


def fft(grid: Grid, field: np.ndarray) -> np.ndarray:
    return np.fft.fftn(field, axes=_axes(grid))


def ifft(grid: Grid, spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(spectrum, axes=_axes(grid))


@dataclass(frozen=True)
class MultiplierSymbol:
    """A Fourier multiplier ``xi -> rule(grid)``.

    ``rule`` returns an array broadcastable against the field spectrum, so a
    spinor symbol may return shape ``(2, *grid.shape)``.
    """

    rule: Callable[[Grid], np.ndarray]
    tag: str = "generic"

    def evaluate(self, grid: Grid) -> np.ndarray:
        return self.rule(grid)

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        return MultiplierSymbol(
            lambda g: self.rule(g) * other.rule(g), tag=f"{self.tag}*{other.tag}"
        )


def apply_multiplier(grid: Grid, field: np.ndarray, symbol) -> np.ndarray:
    """Return ``ifft(symbol * fft(field))``.

    ``symbol`` is a :class:`MultiplierSymbol` or an already evaluated array.
    """
    grid.check(field)
    values = symbol.evaluate(grid) if isinstance(symbol, MultiplierSymbol) else symbol
    return ifft(grid, values * fft(grid, field))


def _raised_cosine_low(kabs: np.ndarray, M: float, width: float) -> np.ndarray:
    u = np.clip((kabs - (M - width)) / (2.0 * width), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * u))


def _raised_cosine_high(kabs: np.ndarray, M: float, width: float) -> np.ndarray:
    u = np.clip((kabs - (M - width)) / (2.0 * width), 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * u))


def smooth_cutoff(M: float, width: float | None = None, side: str = "low") -> MultiplierSymbol:
    """Raised-cosine frequency cutoff with transition on ``[M - width, M + width]``.

    The low and high sides sum to one pointwise.  ``width`` defaults to ``M/4``.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    width = M / 4.0 if width is None else float(width)
    if not width > 0:
        raise ValueError("width must be positive")
    if side == "low":
        return MultiplierSymbol(lambda g: _raised_cosine_low(g.kabs, M, width), "cutoff-low")
    if side == "high":
        return MultiplierSymbol(lambda g: _raised_cosine_high(g.kabs, M, width), "cutoff-high")
    raise ValueError(f"side must be 'low' or 'high', got {side!r}")


def sharp_cutoff(M: float, side: str = "low") -> MultiplierSymbol:
    if side == "low":
        return MultiplierSymbol(lambda g: (g.kabs <= M).astype(float), "cutoff-low")
    return MultiplierSymbol(lambda g: (g.kabs > M).astype(float), "cutoff-high")


def derivative_symbol(axis: int) -> MultiplierSymbol:
    """``i xi_axis`` with the Nyquist mode zeroed."""

    def rule(g: Grid) -> np.ndarray:
        sym = 1j * g.k[axis]
        return np.where(g.nyquist_mask, 0.0, sym)

    return MultiplierSymbol(rule, f"d/dx{axis}")


def translation_symbol(shift) -> MultiplierSymbol:
    """Symbol of ``exp(i shift . p)`` with ``p = -i grad``, i.e. ``f -> f(x + shift)``."""
    shift = np.atleast_1d(np.asarray(shift, dtype=float))

    def rule(g: Grid) -> np.ndarray:
        phase = sum(s * kk for s, kk in zip(shift, g.k))
        return np.exp(1j * phase)

    return MultiplierSymbol(rule, "translation")


def translate(grid: Grid, field: np.ndarray, shift) -> np.ndarray:
    """Spectral translation ``f(x) -> f(x + shift)``."""
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if not np.any(shift):
        return np.array(field, dtype=complex)
    return apply_multiplier(grid, field, translation_symbol(shift))


def spectral_l2(grid: Grid, spectrum: np.ndarray) -> float:
    """L2 norm computed on the spectral side (Parseval with explicit weights)."""
    return float(np.sqrt(np.sum(np.abs(spectrum) ** 2) * grid.weight / grid.size))


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> complex:
    """Quadrature inner product, linear in ``f`` and antilinear in ``g``."""
    return complex(np.sum(f * np.conj(g)) * grid.weight)


def _modulus(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean modulus over spinor components."""
    if field.ndim == grid.dim:
        return np.abs(field)
    return np.sqrt(np.sum(np.abs(field) ** 2, axis=tuple(range(field.ndim - grid.dim))))


def norm_lp(grid: Grid, field: np.ndarray, p) -> float:
    grid.check(field)
    a = _modulus(grid, field)
    if p == 1:
        return float(np.sum(a) * grid.weight)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * grid.weight))
    if p in (np.inf, "inf", float("inf")):
        return float(a.max()) if a.size else 0.0
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


def l2_plus_linf_objective(modulus: np.ndarray, weight: float, lam: float) -> float:
    """``J(lam) = ||(|f| - lam)_+||_2 + lam``."""
    excess = np.maximum(modulus - lam, 0.0)
    return float(np.sqrt(np.sum(excess * excess) * weight) + lam)


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def norm_l2_plus_linf(grid: Grid, field: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """Return ``(value, lam)`` minimising ``J`` over ``lam in [0, ||f||_inf]``.

    The optimal splitting soft-thresholds ``f`` at ``lam``: the part above the
    threshold goes into L2 and the clipped remainder into L-infinity.  ``J`` is
    convex, so golden-section search is exact up to ``tol`` in ``lam``.
    """
    a = _modulus(grid, field).ravel()
    w = grid.weight
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0, 0.0
    lo, hi = 0.0, top
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc = l2_plus_linf_objective(a, w, c)
    fd = l2_plus_linf_objective(a, w, d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = l2_plus_linf_objective(a, w, c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = l2_plus_linf_objective(a, w, d)
    candidates = [(fc, c), (fd, d)]
    # the minimum may sit on an endpoint (pure L2 or pure L-infinity split)
    candidates.append((l2_plus_linf_objective(a, w, 0.0), 0.0))
    candidates.append((top, top))
    value, lam = min(candidates)
    return float(value), float(lam)


def norm_l1_cap_l2(grid: Grid, field: np.ndarray) -> float:
    """``max(||f||_1, ||f||_2)``, the norm dual to L2 + L-infinity."""
    return max(norm_lp(grid, field, 1), norm_lp(grid, field, 2))


def gradient(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Spectral gradient; the derivative index is prepended as a new leading axis."""
    spec = fft(grid, field)
    return np.stack(
        [ifft(grid, derivative_symbol(a).evaluate(grid) * spec) for a in range(grid.dim)]
    )
