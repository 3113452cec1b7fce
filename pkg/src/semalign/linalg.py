"""Complex dense linear-algebra kernels shared by the whole simulator.

Hermitian eigendecomposition, the shifted two-sided Sylvester solver used by
the precoder update, its vectorized brute-force twin, pre-whitening, and the
trace-ball projection.  All functions are pure: they never mutate their
arguments and are safe to call from concurrent workers.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HermitianEig",
    "hermitian_eig",
    "sylvester_solve",
    "kron_vec_solve",
    "whiten",
    "unwhiten",
    "trace_ball_project",
]

_HERM_TOL = 1e-12


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition M = V diag(w) V^H with ascending real eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(M) -> HermitianEig:
    """Eigendecompose a (numerically) Hermitian matrix.

    The input is symmetrized as (M + M^H)/2 before factorization; inputs that
    deviate from Hermitian symmetry by more than ``1e-12`` (relative) are
    rejected.
    """
    M = _as_matrix(M, "M")
    r, c = M.shape
    if r != c:
        raise ValueError(f"hermitian_eig needs a square matrix, got {r}x{c}")
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.linalg.norm(M - M.conj().T) > _HERM_TOL * scale * r:
        raise ValueError("matrix is not Hermitian within tolerance")
    H = 0.5 * (M + M.conj().T)
    w, V = np.linalg.eigh(H)
    return HermitianEig(eigenvalues=w, eigenvectors=V)


def sylvester_solve(A, B, shift: float, C) -> np.ndarray:
    """Solve A F B + shift*F = C for Hermitian PSD A, B and shift > 0.

    Both sides are eigendecomposed, A = Ua diag(a) Ua^H and
    B = Ub diag(b) Ub^H, and the rotated system is solved elementwise by
    dividing by (a_i * b_j + shift).  Positive shift keeps every divisor
    bounded away from zero even when A or B is rank deficient.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    C = _as_matrix(C, "C")
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    p, q = C.shape
    if A.shape != (p, p) or B.shape != (q, q):
        raise ValueError(
            f"dimension mismatch: A{A.shape}, B{B.shape}, C{C.shape}"
        )
    ea = hermitian_eig(A)
    eb = hermitian_eig(B)
    # rotate, divide, rotate back
    Ct = ea.eigenvectors.conj().T @ C @ eb.eigenvectors
    denom = np.outer(ea.eigenvalues, eb.eigenvalues) + shift
    Ft = Ct / denom
    return ea.eigenvectors @ Ft @ eb.eigenvectors.conj().T


def kron_vec_solve(A, B, shift: float, C) -> np.ndarray:
    """Brute-force twin of :func:`sylvester_solve` via the Kronecker lift.

    Builds (B^T kron A + shift*I) explicitly and solves for vec(F).  Only
    meant for small systems (p*q <= ~400); it serves as an independent oracle
    for the eigen-based solver.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    C = _as_matrix(C, "C")
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    p, q = C.shape
    if A.shape != (p, p) or B.shape != (q, q):
        raise ValueError(
            f"dimension mismatch: A{A.shape}, B{B.shape}, C{C.shape}"
        )
    K = np.kron(B.T, A) + shift * np.eye(p * q)
    try:
        f = np.linalg.solve(K, C.reshape(p * q, order="F"))
    except np.linalg.LinAlgError as exc:  # should not happen for PSD inputs
        raise ValueError(f"singular Kronecker system: {exc}") from exc
    return f.reshape((p, q), order="F")


def whiten(S, eps: float = 1e-8):
    """Center and whiten the columns of a real d x n matrix.

    Returns ``(whitened, mean, W)`` with ``whitened = W @ (S - mean)`` and
    ``W = (Cov + eps*I)^(-1/2)``.  The sample covariance uses the 1/n
    convention.  ``eps`` regularizes rank-deficient inputs.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise ValueError("whiten expects a 2-D matrix")
    if not np.all(np.isfinite(S)):
        raise ValueError("whiten input contains non-finite entries")
    if S.shape[1] < 2:
        raise ValueError("whiten needs at least 2 samples")
    if eps <= 0:
        raise ValueError("eps must be positive")
    mean = S.mean(axis=1, keepdims=True)
    S0 = S - mean
    cov = (S0 @ S0.T) / S.shape[1]
    w, V = np.linalg.eigh(cov)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(w, 0.0) + eps)
    W = (V * inv_sqrt) @ V.T
    return W @ S0, mean, W


def unwhiten(Sw, mean, W) -> np.ndarray:
    """Invert the affine map produced by :func:`whiten`."""
    return np.linalg.solve(W, np.asarray(Sw)) + mean


def trace_ball_project(Zhat, power_budget: float) -> np.ndarray:
    """Project onto {Z : tr(Z Z^H) <= power_budget} in Frobenius norm.

    Interior points pass through unchanged; exterior points are rescaled by
    1/(1 + lam) with lam = sqrt(tr(Z Z^H)/budget) - 1, which lands exactly on
    the boundary.
    """
    Z = _as_matrix(Zhat, "Zhat")
    if power_budget <= 0:
        raise ValueError("power budget must be positive")
    sq = float(np.sum(np.abs(Z) ** 2))
    if sq <= power_budget:
        return Z.copy()
    lam = np.sqrt(sq / power_budget) - 1.0
    return Z / (1.0 + lam)
