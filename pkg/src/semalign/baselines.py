"""Comparison methods: disjoint channel equalization plus latent alignment.

First-K / Top-K feature selection over an SVD-MMSE equalized link with a
power-constrained precoder, ridge least-squares aligners, and the multi-link
scheme that gives every user an independently optimized precoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import AlignmentProblem, run_centralized
from .channel import MimoChannel

__all__ = [
    "svd_mmse_equalizer",
    "baseline_precoder",
    "lsq_align",
    "first_k_encode",
    "first_k_decode",
    "top_k_encode",
    "top_k_decode",
    "SelectionCode",
]

LSQ_RIDGE = 1e-10


def svd_mmse_equalizer(h_base: np.ndarray, snr_db: float, uses: int,
                       ones_variant: bool = False) -> np.ndarray:
    """MMSE equalizer from the SVD of the base channel, applied per use.

    With H = U S V^H the per-use block is M = (S^H S + I/SNR)^(-1) (U S)^H,
    paired with V precoding at the transmit side.  The default lifts M as
    I_K kron M (one block per channel use); ``ones_variant`` instead sums the
    uses as 1_K^T kron M, kept only for auditing the alternative reading.
    """
    Uc, s, Vh = np.linalg.svd(h_base)
    snr = 10.0 ** (snr_db / 10.0)
    n_t = h_base.shape[1]
    S = np.zeros((h_base.shape[0], n_t))
    S[: s.size, : s.size] = np.diag(s)
    M = np.linalg.solve(S.T @ S + np.eye(n_t) / snr, (Uc @ S).conj().T)
    if ones_variant:
        return np.kron(np.ones((1, uses)), M)
    return np.kron(np.eye(uses), M)


def svd_tx_precoder(h_base: np.ndarray, uses: int) -> np.ndarray:
    """Transmit-side rotation V per use, matching :func:`svd_mmse_equalizer`."""
    _, _, Vh = np.linalg.svd(h_base)
    return np.kron(np.eye(uses), Vh.conj().T)


def baseline_precoder(X: np.ndarray, channels, equalizers,
                      power_budget: float, rho: float = 1.0,
                      iterations: int = 30,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Power-constrained precoder reproducing X through fixed equalizers.

    Reuses the ADMM machinery with the equalizer step skipped and every
    user's target set to X itself; returns the projected final iterate.
    """
    problem = AlignmentProblem(
        X=X, targets=tuple(X for _ in channels), channels=tuple(channels),
        power_budget=power_budget, rho=rho,
    )
    if rng is None:
        rng = np.random.default_rng(0)
    state = run_centralized(problem, iterations=iterations, rng=rng,
                            aggregation="exact", skip_g_step=True,
                            equalizers=list(equalizers))
    return state.deployed_precoder(power_budget)


@dataclass(frozen=True)
class AlignerQ:
    """Per-user real alignment matrix fit by ridge least squares."""

    matrix: np.ndarray


def lsq_align(X: np.ndarray, Y: np.ndarray, ridge: float = LSQ_RIDGE) -> AlignerQ:
    """Q = Y X^H (X X^H + ridge*I)^(-1), the (ridge) least-squares aligner."""
    if X.shape[1] != Y.shape[1]:
        raise ValueError("X and Y must share the sample count")
    P = X @ X.conj().T + ridge * np.eye(X.shape[0])
    Q = np.linalg.solve(P.conj().T, (Y @ X.conj().T).conj().T).conj().T
    return AlignerQ(matrix=Q)


@dataclass(frozen=True)
class SelectionCode:
    """Kept features per sample plus what decode needs to zero-fill."""

    values: np.ndarray          # keep x n kept features
    full_dim: int
    indices: np.ndarray | None  # keep x n for Top-K; None for the fixed prefix


def first_k_encode(S: np.ndarray, keep: int) -> SelectionCode:
    """Keep the first ``keep`` features of every column."""
    d = S.shape[0]
    if keep < 1 or keep > d:
        raise ValueError(f"cannot keep {keep} of {d} features")
    return SelectionCode(values=S[:keep, :].copy(), full_dim=d, indices=None)


def first_k_decode(code: SelectionCode) -> np.ndarray:
    """Zero-fill the dropped suffix."""
    out = np.zeros((code.full_dim, code.values.shape[1]), dtype=code.values.dtype)
    out[: code.values.shape[0], :] = code.values
    return out


def top_k_encode(S: np.ndarray, keep: int) -> SelectionCode:
    """Keep the ``keep`` largest-magnitude features per column.

    Ties break toward the lower index; the index lists travel on an
    error-free side channel.
    """
    d, n = S.shape
    if keep < 1 or keep > d:
        raise ValueError(f"cannot keep {keep} of {d} features")
    # stable sort on (-|s|, index) keeps the lower index on ties
    order = np.argsort(-np.abs(S), axis=0, kind="stable")
    idx = np.sort(order[:keep, :], axis=0)
    vals = np.take_along_axis(S, idx, axis=0)
    return SelectionCode(values=vals, full_dim=d, indices=idx)


def top_k_decode(code: SelectionCode) -> np.ndarray:
    """Scatter the kept values back to their indices, zeros elsewhere."""
    if code.indices is None:
        raise ValueError("decode needs the transmitted index lists")
    out = np.zeros((code.full_dim, code.values.shape[1]), dtype=code.values.dtype)
    np.put_along_axis(out, code.indices, code.values, axis=0)
    return out
