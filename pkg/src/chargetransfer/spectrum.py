"""Bound states with their dual bases, and the projections built from them.

Two solver paths:

* iterative (any dimension, scalar only): LOBPCG on ``H = -Lap/2 + V`` with
  the inverse free operator as preconditioner;
* dense (1D only): full eigendecomposition of the discretized operator with
  left eigenvectors; clusters go through ordered Schur forms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, lobpcg

from .model import HamiltonianSpec, potential_fields
from .spectral import Grid, fft, ifft

log = logging.getLogger(__name__)

__all__ = [
    "EigenSolverError",
    "RankAmbiguityError",
    "ProjectionError",
    "BoundStateBasis",
    "Projector",
    "DenseOperator",
    "KernelStructure",
    "AdmissibilityReport",
    "bound_states_scalar",
    "dense_operator",
    "matrix_spectrum_dense",
    "kernel_structure",
    "generalized_kernel",
    "build_projections",
    "check_admissibility",
    "stability_probe",
    "weighted_tail_ratio",
    "embed_basis",
]

DENSE_LIMIT = 4096


class EigenSolverError(RuntimeError):
    """The iterative eigensolver did not reach the requested residual."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class RankAmbiguityError(RuntimeError):
    """A singular value fell within one decade of the rank threshold."""


class ProjectionError(RuntimeError):
    """The Gram matrix between basis and dual fields is numerically singular."""


@dataclass
class BoundStateBasis:
    """Discrete spectral data of one static operator.

    ``fields`` and ``duals`` have shape ``(m, *field_shape)``.  ``kinds`` marks
    each field as ``"eigen"`` or ``"generalized"``.  For self-adjoint problems
    the duals are the fields and ``coefficients`` is the identity.
    """

    grid: Grid
    kind: str
    eigenvalues: np.ndarray
    fields: np.ndarray
    duals: np.ndarray
    residuals: np.ndarray
    kinds: list = field(default_factory=list)
    coefficients: np.ndarray | None = None
    mu: float = 0.0

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def field_shape(self) -> tuple[int, ...]:
        return self.grid.shape if self.kind == "scalar" else (2,) + self.grid.shape

    @classmethod
    def empty(cls, grid: Grid, kind: str, mu: float = 0.0) -> "BoundStateBasis":
        shape = grid.shape if kind == "scalar" else (2,) + grid.shape
        z = np.zeros((0,) + shape, dtype=complex)
        return cls(grid, kind, np.zeros(0, dtype=complex), z, z.copy(), np.zeros(0), [],
                   np.zeros((0, 0), dtype=complex), mu)


# --------------------------------------------------------------------------
# iterative scalar path

def _l2(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.weight))


def bound_states_scalar(
    V: np.ndarray,
    grid: Grid,
    max_count: int = 8,
    tol: float = 1e-8,
    maxiter: int = 2000,
    seed: int = 0,
) -> BoundStateBasis:
    """All eigenpairs of ``-Lap/2 + V`` below ``-tol`` (at most ``max_count``)."""
    V = np.asarray(V)
    if np.iscomplexobj(V):
        if np.abs(V.imag).max() > 0:
            raise ValueError("bound_states_scalar needs a real potential")
        V = V.real
    grid.check(V)
    n = grid.size
    # real transforms keep only the nonnegative last-axis frequencies
    half_k2 = 0.5 * grid.k2[..., : grid.n // 2 + 1]
    vflat = V.reshape(-1)
    shift = max(1.0, -float(V.min()) + 1.0)
    precond_symbol = 1.0 / (half_k2 + shift)

    def _apply_symbol(sym, X):
        X = X.reshape(grid.shape + (-1,))
        axes = tuple(range(grid.dim))
        Y = np.fft.irfftn(sym[..., None] * np.fft.rfftn(X, axes=axes), s=grid.shape, axes=axes)
        return Y.reshape(n, -1)

    def matmat(X):
        X = np.asarray(X).reshape(n, -1)
        return _apply_symbol(half_k2, X) + vflat[:, None] * X

    H = LinearOperator((n, n), matvec=matmat, matmat=matmat, dtype=float)
    M = LinearOperator((n, n), matvec=lambda x: _apply_symbol(precond_symbol, x),
                       matmat=lambda x: _apply_symbol(precond_symbol, x), dtype=float)
    if not np.any(V < -tol) and V.min() >= 0:
        return BoundStateBasis.empty(grid, "scalar")

    rng = np.random.default_rng(seed)
    block = min(max(2, max_count // 2 + 1), max_count + 1, n - 1)
    while True:
        X0 = rng.standard_normal((n, block))
        # bias the start towards the wells
        X0[:, 0] = np.maximum(-vflat, 0.0) + 1e-3
        lam, X = _lobpcg_converged(H, M, X0, tol, maxiter)
        below = int(np.sum(lam < -tol))
        if below < block or block >= max_count + 1 or block >= n - 1:
            break
        block = min(2 * block, max_count + 1, n - 1)
    keep = np.flatnonzero(lam < -tol)[:max_count]
    lam, X = lam[keep], X[:, keep]
    fields = X.T.reshape((len(keep),) + grid.shape).astype(complex)
    res = np.empty(len(keep))
    for i in range(len(keep)):
        u = fields[i] / _l2(grid, fields[i])
        j = int(np.argmax(np.abs(u)))
        u = u * np.exp(-1j * np.angle(u.flat[j]))
        fields[i] = u
        r = matmat(u.real.reshape(-1)).reshape(grid.shape) - lam[i] * u.real
        res[i] = _l2(grid, r)
    bad = res > max(tol, 1e-12)
    if np.any(bad):
        raise EigenSolverError("eigensolver residual above tolerance", float(res.max()))
    m = len(keep)
    return BoundStateBasis(grid, "scalar", lam.astype(complex), fields, fields.copy(), res,
                           ["eigen"] * m, np.eye(m, dtype=complex), 0.0)


def _lobpcg_converged(H, M, X0, tol, maxiter, chunk=40):
    """LOBPCG in short restarts with Rayleigh-Ritz polishing.

    Only the negative Ritz values must reach ``tol``; slowly converging
    continuum vectors in the block are not waited for.
    """
    import warnings

    X = X0
    best = np.inf
    lam = None
    for _ in range(max(1, maxiter // chunk)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lam, X = lobpcg(H, X, M=M, tol=0.1 * tol, maxiter=chunk, largest=False)
        X, _ = np.linalg.qr(X)
        HX = H.matmat(X)
        small = X.T @ HX
        lam, Q = np.linalg.eigh(0.5 * (small + small.T))
        X = X @ Q
        R = HX @ Q - X * lam
        res = np.linalg.norm(R, axis=0)
        order = np.argsort(lam)
        lam, X, res = lam[order], X[:, order], res[order]
        relevant = res[lam < -tol] if np.any(lam < -tol) else res[:1]
        best = min(best, float(relevant.max()))
        if relevant.max() <= tol:
            return lam, X
    raise EigenSolverError("LOBPCG did not converge", best)


# --------------------------------------------------------------------------
# dense path

@dataclass
class DenseOperator:
    """Dense discretization of a static operator on a 1D grid.

    ``matrix`` acts on stacked component values; ``eps0`` is the assumed
    exponential decay rate of the potential.
    """

    matrix: np.ndarray
    grid: Grid
    kind: str
    mu: float = 0.0
    eps0: float = 1.0

    @property
    def field_shape(self) -> tuple[int, ...]:
        return self.grid.shape if self.kind == "scalar" else (2,) + self.grid.shape


def _kinetic_matrix(grid: Grid) -> np.ndarray:
    n = grid.n
    return np.fft.ifft(0.5 * grid.k2[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)


def dense_operator(ham) -> DenseOperator:
    """Dense ``H`` (scalar) or ``A = diag(H, -H) + V`` with ``H = -Lap/2 + mu`` (matrix)."""
    if isinstance(ham, DenseOperator):
        return ham
    g = ham.grid
    if g.dim != 1:
        raise ValueError("the dense path is 1D only")
    size = g.n * (1 if ham.kind == "scalar" else 2)
    if size > DENSE_LIMIT:
        raise ValueError(f"dense path limited to total dimension {DENSE_LIMIT}, got {size}")
    if not ham.is_static:
        raise ValueError("dense analysis needs a static operator")
    K = _kinetic_matrix(g)
    V = potential_fields(ham, 0.0)
    eps0 = min((p.eps0 for p in ham.potentials), default=1.0)
    if ham.kind == "scalar":
        A = K.real + np.diag(V)
        return DenseOperator(A, g, "scalar", 0.0, eps0)
    n = g.n
    H = K + ham.mu * np.eye(n)
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, :n] = H + np.diag(V[0, 0])
    A[:n, n:] = np.diag(V[0, 1])
    A[n:, :n] = np.diag(V[1, 0])
    A[n:, n:] = -H + np.diag(V[1, 1])
    return DenseOperator(A, g, "matrix", float(ham.mu), eps0)


def _to_fields(op: DenseOperator, vecs: np.ndarray) -> np.ndarray:
    """Columns of ``vecs`` to L2-normalized fields."""
    m = vecs.shape[1]
    out = vecs.T.reshape((m,) + op.field_shape).astype(complex)
    for i in range(m):
        out[i] /= _l2(op.grid, out[i])
    return out


def _outer_mass(grid: Grid, f: np.ndarray) -> float:
    a = np.abs(f) ** 2
    while a.ndim > grid.dim:
        a = a.sum(axis=0)
    outer = np.abs(grid.x[0]) > 0.25 * grid.length
    return float(a[outer].sum() / a.sum())


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i in np.argsort(values.real):
        for g in groups:
            if abs(values[i] - values[g[0]]) < tol:
                g.append(int(i))
                break
        else:
            groups.append([int(i)])
    return groups


def _invariant_subspace(A: np.ndarray, center: complex, radius: float, size: int) -> np.ndarray:
    """Orthonormal basis of the invariant subspace for eigenvalues within ``radius`` of ``center``."""
    T, Z, sdim = sla.schur(A.astype(complex), output="complex",
                           sort=lambda z: abs(z - center) < radius)
    if sdim != size:
        raise RankAmbiguityError(
            f"Schur ordering found {sdim} eigenvalues near {center:.6g}, expected {size}"
        )
    return Z[:, :sdim]


def matrix_spectrum_dense(
    ham,
    tol: float = 1e-6,
    cluster_tol: float = 1e-6,
    localization: float = 0.1,
) -> BoundStateBasis:
    """Discrete spectrum of the dense operator in the gap ``(-mu + tol, mu - tol)``.

    Eigenvalues off the real axis are retained as well (they are discrete by
    construction and make the operator inadmissible).  Retained eigenfields
    must keep at most ``localization`` of their mass in the outer half box.
    Clusters of nearly equal eigenvalues are replaced by an orthonormal basis
    of their invariant subspace with the matching left subspace as duals.
    """
    op = dense_operator(ham)
    A = op.matrix
    w, vl, vr = sla.eig(A, left=True, right=True)
    if op.kind == "scalar":
        inside = w.real < -tol
    else:
        inside = (np.abs(w.real) < op.mu - tol) | (np.abs(w.imag) > tol)
    idx = np.flatnonzero(inside)
    fields_r = _to_fields(op, vr[:, idx]) if idx.size else np.zeros((0,) + op.field_shape, complex)
    keep = [j for j, i in enumerate(idx) if _outer_mass(op.grid, fields_r[j]) <= localization]
    idx = idx[keep]
    if idx.size == 0:
        return BoundStateBasis.empty(op.grid, op.kind, op.mu)
    vals, right, left, kinds = [], [], [], []
    for group in _cluster(w[idx], cluster_tol):
        sel = idx[group]
        if len(sel) == 1:
            vals.append(w[sel[0]])
            right.append(vr[:, sel[0]])
            left.append(vl[:, sel[0]])
            kinds.append("eigen")
            continue
        center = complex(np.mean(w[sel]))
        R = _invariant_subspace(A, center, cluster_tol, len(sel))
        L = _invariant_subspace(A.conj().T, np.conj(center), cluster_tol, len(sel))
        ks = kernel_structure(A - center * np.eye(A.shape[0]), subspace=R)
        for j in range(len(sel)):
            vals.append(w[sel[j]])
            right.append(R[:, j])
            left.append(L[:, j])
            kinds.append("eigen" if j < ks.dims[0] else "generalized")
    vals = np.array(vals)
    fields = _to_fields(op, np.array(right).T)
    duals = _to_fields(op, np.array(left).T)
    res = np.array([_residual(op, fields[i], vals[i], kinds[i]) for i in range(len(vals))])
    basis = BoundStateBasis(op.grid, op.kind, vals, fields, duals, res, kinds, None, op.mu)
    basis.coefficients = _coefficients(basis)
    return basis


def _residual(op: DenseOperator, f: np.ndarray, value: complex, kind: str) -> float:
    v = f.reshape(-1)
    r = op.matrix @ v - value * v
    if kind == "generalized":
        r = op.matrix @ r - value * r
    return float(np.sqrt(np.sum(np.abs(r) ** 2) * op.grid.weight))


# --------------------------------------------------------------------------
# Jordan structure

@dataclass
class KernelStructure:
    """``dims[k-1] = dim ker(A^k)`` for ``k = 1, 2, 3``, plus chain generators."""

    dims: tuple[int, int, int]
    threshold: float
    kernel: np.ndarray
    generalized: np.ndarray

    @property
    def chains(self) -> int:
        return self.dims[1] - self.dims[0]

    @property
    def terminates(self) -> bool:
        return self.dims[1] == self.dims[2]


def _null_rank(M: np.ndarray, thr: float) -> tuple[int, np.ndarray]:
    if M.size == 0:
        return 0, np.zeros((M.shape[1], 0), dtype=complex)
    _, s, vh = np.linalg.svd(M)
    near = (s > thr / 10.0) & (s < thr * 10.0)
    if np.any(near):
        raise RankAmbiguityError(
            f"singular value {s[near][0]:.3e} within a decade of threshold {thr:.3e}; adjust tol"
        )
    null = s <= thr
    return int(null.sum()), vh[null].conj().T


def kernel_structure(A: np.ndarray, rtol: float = 1e-8, window: float = 1e-3,
                     subspace: np.ndarray | None = None) -> KernelStructure:
    """Dimensions of ``ker A``, ``ker A^2``, ``ker A^3`` by singular-value thresholding.

    Ranks are taken on the Schur block of eigenvalues with ``|z| < window``
    (or on ``subspace``, an orthonormal basis of an invariant subspace), so
    the large kinetic part of ``A`` does not pollute the powers.  The
    threshold is ``rtol`` times the largest singular value of ``A``.
    """
    A = np.asarray(A, dtype=complex)
    smax = float(np.linalg.norm(A, 2))
    thr = rtol * max(smax, 1e-300)
    if subspace is None:
        _, Z, sdim = sla.schur(A, output="complex", sort=lambda z: abs(z) < window)
        Z = Z[:, :sdim]
    else:
        Z = subspace
    T = Z.conj().T @ A @ Z
    m = T.shape[0]
    if m == 0:
        empty = np.zeros((A.shape[0], 0), dtype=complex)
        return KernelStructure((0, 0, 0), thr, empty, empty)
    dims, bases = [], []
    P = np.eye(m, dtype=complex)
    for _ in range(3):
        P = T @ P
        d, N = _null_rank(P, thr)
        dims.append(d)
        bases.append(N)
    ker = Z @ bases[0]
    # generators of ker(A^2) orthogonal to ker(A)
    K2 = bases[1]
    if bases[0].shape[1]:
        K2 = K2 - bases[0] @ (bases[0].conj().T @ K2)
    if K2.shape[1]:
        u, s, _ = np.linalg.svd(K2, full_matrices=False)
        K2 = u[:, s > 0.5]
    gen = Z @ K2
    return KernelStructure(tuple(dims), thr, ker, gen)


def generalized_kernel(ham, basis: BoundStateBasis | None = None, tol: float = 1e-8,
                       window: float = 1e-3) -> tuple[BoundStateBasis, KernelStructure]:
    """Kernel dimensions of ``A`` and a basis augmented with Jordan-chain generators.

    ``ham`` may be a Hamiltonian, a :class:`DenseOperator` or a raw square matrix
    (then ``basis`` is returned unchanged apart from the structure).
    """
    if isinstance(ham, np.ndarray):
        ks = kernel_structure(ham, tol, window)
        return basis, ks
    op = dense_operator(ham)
    ks = kernel_structure(op.matrix, tol, window)
    if basis is None:
        basis = matrix_spectrum_dense(op)
    have_gen = sum(1 for k in basis.kinds if k == "generalized")
    if ks.chains and have_gen < ks.chains:
        # append chain generators together with left-subspace duals
        L = kernel_structure(op.matrix.conj().T, tol, window)
        gen = _to_fields(op, ks.generalized)
        dual = _to_fields(op, L.generalized)
        k = gen.shape[0]
        basis = BoundStateBasis(
            basis.grid, basis.kind,
            np.concatenate([basis.eigenvalues, np.zeros(k, dtype=complex)]),
            np.concatenate([basis.fields, gen]),
            np.concatenate([basis.duals, dual]),
            np.concatenate([basis.residuals, [_residual(op, g, 0.0, "generalized") for g in gen]]),
            basis.kinds + ["generalized"] * k, None, basis.mu,
        )
        basis.coefficients = _coefficients(basis)
    return basis, ks


# --------------------------------------------------------------------------
# projections

def _gram(basis: BoundStateBasis) -> np.ndarray:
    """``G[i, j] = <phi_j, psi_i>``."""
    w = basis.grid.weight
    m = len(basis)
    F = basis.fields.reshape(m, -1)
    D = basis.duals.reshape(m, -1)
    return (D.conj() @ F.T) * w


def _coefficients(basis: BoundStateBasis, max_cond: float = 1e12) -> np.ndarray:
    m = len(basis)
    if m == 0:
        return np.zeros((0, 0), dtype=complex)
    G = _gram(basis)
    # entries of the norm-scaled Gram are at most 1, so 1/s_min measures how
    # close the field/dual pairing is to degenerate (also for a single pair)
    w = basis.grid.weight
    nf = np.sqrt(w) * np.linalg.norm(basis.fields.reshape(m, -1), axis=1)
    nd = np.sqrt(w) * np.linalg.norm(basis.duals.reshape(m, -1), axis=1)
    if np.any(nf == 0) or np.any(nd == 0):
        raise ProjectionError("basis contains a zero field or dual")
    smin = np.linalg.svd(G / np.outer(nd, nf), compute_uv=False).min()
    cond = 1.0 / smin if smin > 0 else np.inf
    if not np.isfinite(cond) or cond > max_cond:
        raise ProjectionError(f"normalized Gram matrix condition {cond:.3e} exceeds {max_cond:.0e}")
    # sum_i c_ij G_ik = delta_jk
    return np.linalg.inv(G).T


@dataclass
class Projector:
    """``P_b f = sum_ij phi_j c_ij <f, psi_i>``; ``complement`` gives ``P_c = Id - P_b``."""

    grid: Grid
    fields: np.ndarray
    duals: np.ndarray
    coefficients: np.ndarray
    complement: bool = False

    @property
    def rank(self) -> int:
        return self.fields.shape[0]

    def coefficients_of(self, f: np.ndarray) -> np.ndarray:
        """``a_j = sum_i c_ij <f, psi_i>``."""
        m = self.rank
        if m == 0:
            return np.zeros(0, dtype=complex)
        D = self.duals.reshape(m, -1)
        overlaps = (D.conj() @ np.asarray(f).reshape(-1)) * self.grid.weight
        return self.coefficients.T @ overlaps

    def bound_part(self, f: np.ndarray) -> np.ndarray:
        a = self.coefficients_of(f)
        if a.size == 0:
            return np.zeros_like(np.asarray(f, dtype=complex))
        return np.tensordot(a, self.fields, axes=1)

    def apply(self, f: np.ndarray) -> np.ndarray:
        b = self.bound_part(f)
        return np.asarray(f, dtype=complex) - b if self.complement else b

    __call__ = apply


def build_projections(basis: BoundStateBasis, max_cond: float = 1e12) -> tuple[Projector, Projector]:
    c = _coefficients(basis, max_cond)
    basis.coefficients = c
    Pb = Projector(basis.grid, basis.fields, basis.duals, c, False)
    Pc = Projector(basis.grid, basis.fields, basis.duals, c, True)
    return Pb, Pc


# --------------------------------------------------------------------------
# admissibility

@dataclass
class AdmissibilityReport:
    kind: str
    mu: float
    eigenvalues: list
    realness_defects: list
    max_realness_defect: float
    complex_spectrum: bool
    gap_eigenvalues: list
    kernel_dims: list
    jordan_terminates_at_zero: bool
    jordan_terminates_nonzero: dict
    localization_rate: float
    localized_fields: list
    localized_duals: list
    embedded_eigenvalues: list
    stability_probe: float | None
    threshold_resonances: str
    admissible: bool
    reasons: list


def weighted_tail_ratio(grid: Grid, f: np.ndarray, rate: float) -> float:
    """Relative change of ``int exp(2 rate |x|)|f|^2`` between the central half box and the whole box.

    A small value means the weighted integral has converged on the grid.
    """
    a = np.abs(f) ** 2
    while a.ndim > grid.dim:
        a = a.sum(axis=0)
    r = grid.r
    w = np.exp(2.0 * rate * r) * a
    central = w[r <= 0.25 * grid.length].sum()
    total = w.sum()
    return float((total - central) / total)


def _embedded(op: DenseOperator, w: np.ndarray, vr: np.ndarray, tol: float, localization: float) -> list:
    """Real eigenvalues on the essential spectrum whose eigenfields stay localized."""
    found = []
    ess = (np.abs(w.real) >= op.mu + tol) & (np.abs(w.imag) <= tol)
    for i in np.flatnonzero(ess):
        f = vr[:, i].reshape(op.field_shape)
        if _outer_mass(op.grid, f) < localization * 1e-3:
            found.append(complex(w[i]))
    return found


def check_admissibility(
    ham,
    tol: float = 1e-6,
    rank_tol: float = 1e-8,
    tail_tol: float = 1e-3,
    probe_times: Sequence[float] = (0.0, 5.0, 10.0, 20.0),
    probe_dt: float = 0.01,
    samples: int = 4,
    seed: int = 0,
) -> AdmissibilityReport:
    """Evaluate the checkable admissibility conditions of a static operator.

    Threshold resonances are not checked and are reported as such.
    """
    op = dense_operator(ham)
    basis = matrix_spectrum_dense(op, tol)
    reasons = []
    vals = basis.eigenvalues
    defects = [float(abs(z.imag)) for z in vals]
    complex_spec = any(d > tol for d in defects)
    if complex_spec:
        reasons.append("complex spectrum")
    limit = op.mu if op.kind == "matrix" else np.inf
    gap = [float(z.real) for z in vals if abs(z.imag) <= tol and abs(z.real) < limit]

    ks = kernel_structure(op.matrix, rank_tol)
    if not ks.terminates:
        reasons.append("Jordan chain at zero does not terminate at ker(A^2)")
    nonzero = {}
    for z in {round(float(v.real), 8) for v in vals if abs(v) > 1e-3 and abs(v.imag) <= tol}:
        sub = kernel_structure(op.matrix - z * np.eye(op.matrix.shape[0]), rank_tol)
        ok = sub.dims[0] == sub.dims[1]
        nonzero[f"{z:.8g}"] = ok
        if not ok:
            reasons.append(f"nontrivial Jordan block at {z:.6g}")

    rate = 0.5 * op.eps0
    loc_f = [weighted_tail_ratio(op.grid, f, rate) < tail_tol for f in basis.fields]
    loc_d = [weighted_tail_ratio(op.grid, f, rate) < tail_tol for f in basis.duals]
    if not all(loc_f) or not all(loc_d):
        reasons.append("bound states not exponentially localized at rate eps0/2")

    w, vr = sla.eig(op.matrix)
    embedded = _embedded(op, w, vr, tol, 0.1) if op.kind == "matrix" else []
    if embedded:
        reasons.append("embedded eigenvalues in the essential spectrum")

    probe = None
    if not complex_spec and isinstance(ham, HamiltonianSpec):
        try:
            _, Pc = build_projections(basis)
            rng = np.random.default_rng(seed)
            fields = [_random_field(op.grid, op.kind, rng) for _ in range(samples)]
            probe = stability_probe(ham, Pc, probe_times, fields, probe_dt)
        except ProjectionError as exc:
            reasons.append(str(exc))
    return AdmissibilityReport(
        kind=op.kind,
        mu=op.mu,
        eigenvalues=[complex(z) for z in vals],
        realness_defects=defects,
        max_realness_defect=max(defects, default=0.0),
        complex_spectrum=complex_spec,
        gap_eigenvalues=gap,
        kernel_dims=list(ks.dims),
        jordan_terminates_at_zero=ks.terminates,
        jordan_terminates_nonzero=nonzero,
        localization_rate=rate,
        localized_fields=loc_f,
        localized_duals=loc_d,
        embedded_eigenvalues=embedded,
        stability_probe=probe,
        threshold_resonances="not checked",
        admissible=not reasons,
        reasons=reasons,
    )


def _random_field(grid: Grid, kind: str, rng: np.random.Generator, width: float = 2.0) -> np.ndarray:
    """Smooth random packet localized near the origin."""
    shape = grid.shape if kind == "scalar" else (2,) + grid.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    smooth = np.exp(-0.5 * grid.k2 / 4.0)
    f = ifft(grid, smooth * fft(grid, noise)) * np.exp(-0.5 * (grid.r / width) ** 2)
    return f / _l2(grid, f)


def stability_probe(ham, Pc: Projector, t_samples: Sequence[float], sample_fields: Sequence[np.ndarray],
                    dt: float = 0.01) -> float:
    """``max ||exp(itA) P_c f|| / ||P_c f||`` over sample times and fields (a lower-bound witness)."""
    from .propagate import SplitStepper

    times = np.unique(np.asarray(t_samples, dtype=float))
    if np.any(times < 0):
        raise ValueError("sample times must be nonnegative")
    grid = ham.grid
    # exp(itA) is the scheme run with negative step
    stepper = SplitStepper(ham, -dt)
    best = 0.0
    for f in sample_fields:
        psi = Pc.apply(np.asarray(f, dtype=complex))
        base = _l2(grid, psi)
        if base == 0:
            continue
        t_now = 0.0
        for t in times:
            n = int(round((t - t_now) / dt))
            psi = stepper.advance(psi, -t_now, n)
            t_now += n * dt
            best = max(best, _l2(grid, psi) / base)
    return float(best)


def embed_basis(basis: BoundStateBasis, grid: Grid) -> BoundStateBasis:
    """Zero-pad a basis computed on a smaller box into ``grid`` (same spacing, same centre).

    Localized eigenfields are unchanged up to their tails at the old box edge,
    which lets a dense solve on a small box serve a long run on a large one.
    """
    small = basis.grid
    if grid.dim != small.dim or not np.isclose(grid.spacing, small.spacing, rtol=1e-12):
        raise ValueError("embedding needs matching dimension and spacing")
    if grid.n < small.n or (grid.n - small.n) % 2:
        raise ValueError("target grid must be larger by an even number of points")
    pad = (grid.n - small.n) // 2
    lead = basis.fields.ndim - small.dim
    widths = [(0, 0)] * lead + [(pad, pad)] * small.dim

    def grow(a):
        return np.pad(a, widths)

    out = BoundStateBasis(grid, basis.kind, basis.eigenvalues.copy(), grow(basis.fields),
                          grow(basis.duals), basis.residuals.copy(), list(basis.kinds), None, basis.mu)
    out.coefficients = _coefficients(out)
    return out
