"""Symmetric sparse storage plus the two iterative kernels used everywhere:
Jacobi-preconditioned conjugate gradients for SPD systems, and inverse
power iteration for the smallest eigenpair of a symmetric pencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvariantViolation, NotSPDError

_SYM_RTOL = 1e-14


class SparseSym:
    """Symmetric sparse matrix in compressed row storage.

    Thin wrapper over a CSR matrix that enforces the structural contract:
    numerically symmetric (1e-14 relative), sorted column indices, no
    duplicate entries.  Instances are immutable after construction.
    """

    def __init__(self, csr: sp.csr_matrix, validate: bool = True):
        if csr.shape[0] != csr.shape[1]:
            raise InvariantViolation("matrix must be square")
        csr = csr.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr
        if validate:
            self._check_symmetry()

    def _check_symmetry(self) -> None:
        diff = self._csr - self._csr.T
        if diff.nnz:
            scale = np.abs(self._csr.data).max() if self._csr.nnz else 0.0
            worst = np.abs(diff.data).max()
            if worst > _SYM_RTOL * max(scale, 1e-300):
                raise InvariantViolation(
                    f"matrix asymmetry {worst:.3e} exceeds "
                    f"{_SYM_RTOL:.0e} * {scale:.3e}")

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "SparseSym":
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseSym":
        return cls(sp.csr_matrix(np.asarray(dense, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SparseSym":
        return cls(sp.identity(n, format="csr"), validate=False)

    @classmethod
    def diagonal_matrix(cls, diag: np.ndarray) -> "SparseSym":
        return cls(sp.diags(np.asarray(diag, dtype=float)).tocsr(),
                   validate=False)

    @property
    def dim(self) -> int:
        return self._csr.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def todense(self) -> np.ndarray:
        return self._csr.toarray()

    def max_abs(self) -> float:
        return float(np.abs(self._csr.data).max()) if self._csr.nnz else 0.0

    def scaled(self, alpha: float) -> "SparseSym":
        return SparseSym(self._csr * alpha, validate=False)

    def __add__(self, other: "SparseSym") -> "SparseSym":
        return SparseSym(self._csr + other._csr, validate=False)


@dataclass
class SolveReport:
    """Outcome of an iterative solve."""

    iterations: int
    final_relative_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None


def cg_solve(K: SparseSym, b: np.ndarray, tol: float = 1e-10,
             max_iter: int | None = None, x0: np.ndarray | None = None,
             record_iterates: bool = False) -> tuple[np.ndarray, SolveReport]:
    """Jacobi-preconditioned conjugate gradients for SPD K.

    Stops when the 2-norm residual drops below tol * ||b||.  A zero or
    negative diagonal entry (which an SPD matrix cannot have) raises
    NotSPDError.  Non-convergence is reported, not raised: callers decide.
    """
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InvariantViolation("right-hand side contains non-finite entries")
    n = K.dim
    if max_iter is None:
        max_iter = max(200, 4 * n)
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise NotSPDError("matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, [0.0])

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - K.matvec(x)
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r)) / b_norm]
    iterates = [x.copy()] if record_iterates else None

    iterations = 0
    converged = history[-1] <= tol
    while not converged and iterations < max_iter:
        Kp = K.matvec(p)
        pKp = float(p @ Kp)
        if pKp <= 0:
            raise NotSPDError("encountered non-positive curvature direction")
        alpha = rz / pKp
        x += alpha * p
        r -= alpha * Kp
        iterations += 1
        rel = float(np.linalg.norm(r)) / b_norm
        history.append(rel)
        if record_iterates:
            iterates.append(x.copy())
        if rel <= tol:
            converged = True
            break
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    return x, SolveReport(iterations, history[-1], converged, history, iterates)


def inverse_power_generalized(
        K: SparseSym, B: SparseSym, tol: float = 1e-12,
        max_iter: int = 200, cg_tol: float = 1e-13,
) -> tuple[float, np.ndarray, SolveReport]:
    """Smallest eigenpair of K phi = mu B phi for SPD K, PSD B != 0.

    Repeatedly solves K y = B phi and renormalizes in the B-inner
    product; the eigenvalue estimate is the Rayleigh quotient.  Stops
    when the eigenvalue increment falls below tol * max(1, |mu|).  The
    returned vector is scaled so its largest entry is exactly 1, with the
    sign fixed so the B-weighted mean is positive.
    """
    n = K.dim
    phi = np.ones(n)
    bnorm2 = float(phi @ B.matvec(phi))
    if bnorm2 <= 0:
        raise InvariantViolation("B must be nonzero positive semidefinite")
    phi /= np.sqrt(bnorm2)

    mu = float(phi @ K.matvec(phi))
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        rhs = B.matvec(phi)
        # the next unnormalized iterate is close to phi / mu
        y, rep = cg_solve(K, rhs, tol=cg_tol, x0=phi / max(abs(mu), 1e-300))
        if not rep.converged:
            break
        bn = float(y @ B.matvec(y))
        if bn <= 0:
            raise InvariantViolation("iterate left the B-positive cone")
        phi = y / np.sqrt(bn)
        mu_new = float(phi @ K.matvec(phi)) / float(phi @ B.matvec(phi))
        delta = abs(mu_new - mu)
        history.append(delta)
        mu = mu_new
        if delta <= tol * max(1.0, abs(mu)):
            converged = True
            break

    if float(np.ones(n) @ B.matvec(phi)) < 0:
        phi = -phi
    peak = phi.max()
    if peak <= 0:
        raise InvariantViolation(
            "eigenvector has no positive entry after sign normalization")
    phi = phi / peak

    k_phi = K.matvec(phi)
    resid = float(np.linalg.norm(k_phi - mu * B.matvec(phi)))
    rel = resid / max(float(np.linalg.norm(k_phi)), 1e-300)
    return mu, phi, SolveReport(iterations, rel, converged, history)
