"""Core alignment optimizer.

Objective evaluation and the four ADMM block updates (per-user equalizer
step, per-user precoder solve, aggregation, power projection, dual update),
plus a centralized reference runner that serves as ground truth for the
message-passing implementation in :mod:`semalign.federation`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import sylvester_solve, trace_ball_project

__all__ = [
    "AlignmentProblem",
    "AdmmState",
    "IterationRecord",
    "objective_value",
    "g_update",
    "g_gradient",
    "local_f_ingredients",
    "local_f_solve",
    "f_aggregate",
    "f_aggregate_exact",
    "z_update",
    "u_update",
    "init_precoder",
    "run_centralized",
]

# diagonal loading for the equalizer inverse when sigma^2 = 0 leaves the Gram
# matrix rank deficient
G_STEP_RIDGE = 1e-10


@dataclass(frozen=True)
class AlignmentProblem:
    """Immutable bundle: whitened paired pilots, channels, budget, penalty."""

    X: np.ndarray                  # d/2 x n complex pilots at the AP
    targets: tuple                 # per-user m_l/2 x n complex target pilots
    channels: tuple                # per-user MimoChannel
    power_budget: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if self.power_budget <= 0 or self.rho <= 0:
            raise ValueError("power budget and rho must be positive")
        if len(self.targets) != len(self.channels):
            raise ValueError("need one channel per user target")
        if not self.targets:
            raise ValueError("need at least one user")
        n = self.X.shape[1]
        for Y in self.targets:
            if Y.shape[1] != n:
                raise ValueError("all targets must share the pilot count of X")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def num_users(self) -> int:
        return len(self.targets)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def precoder_shape(self) -> tuple:
        ch = self.channels[0]
        return (ch.uses * ch.n_t, self.X.shape[0])

    def gram(self) -> np.ndarray:
        """B = X X^H, common to every user's precoder subproblem."""
        return self.X @ self.X.conj().T


@dataclass(frozen=True)
class IterationRecord:
    t: int
    objective: float
    primal_residual: float
    dual_residual: float


@dataclass
class AdmmState:
    """Iterates of the splitting plus the per-iteration trace."""

    F: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    equalizers: list
    t: int = 0
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # per-iteration F copies, opt-in

    def deployed_precoder(self, power_budget: float) -> np.ndarray:
        """Final transmit matrix: last iterate projected onto the power ball."""
        return trace_ball_project(self.F, power_budget)


def objective_value(problem: AlignmentProblem, F, equalizers) -> float:
    """Empirical alignment risk plus the expected amplified-noise penalty.

    (1/(L n)) sum_l ||Y_l - G_l H_l F X||_F^2 + sum_l sigma_l^2 ||G_l||_F^2
    """
    L, n = problem.num_users, problem.n
    data = 0.0
    noise = 0.0
    for Y, ch, G in zip(problem.targets, problem.channels, equalizers):
        R = Y - G @ (ch.lifted @ (F @ problem.X))
        data += float(np.sum(np.abs(R) ** 2))
        noise += ch.noise_variance * float(np.sum(np.abs(G) ** 2))
    return data / (L * n) + noise


def g_update(Y, M, n: int, sigma2: float) -> np.ndarray:
    """Closed-form equalizer update G = Y M^H (M M^H + n*sigma2*I)^(-1).

    Unique minimizer of (1/n)||Y - G M||_F^2 + sigma2*||G||_F^2.  In the
    noiseless rank-deficient case the inverse falls back to a documented
    ``G_STEP_RIDGE`` diagonal loading.
    """
    if Y.shape[1] != M.shape[1]:
        raise ValueError("Y and M must share the pilot count")
    P = M @ M.conj().T + n * sigma2 * np.eye(M.shape[0])
    if sigma2 == 0:
        P = P + G_STEP_RIDGE * np.eye(M.shape[0])
    return np.linalg.solve(P.conj().T, (Y @ M.conj().T).conj().T).conj().T


def g_gradient(Y, M, n: int, sigma2: float, G) -> np.ndarray:
    """Conjugate (Wirtinger) gradient of the per-user equalizer objective."""
    return (G @ M - Y) @ M.conj().T / n + sigma2 * G


def local_f_ingredients(G, H, X, Y, Z, U, n: int, rho: float):
    """Per-user Sylvester ingredients (A_l, C_l) for the precoder subproblem."""
    GH = G @ H
    A = GH.conj().T @ GH
    A = 0.5 * (A + A.conj().T)  # enforce exact Hermitian symmetry
    C = n * rho * (Z - U) + (GH.conj().T @ Y) @ X.conj().T
    return A, C


def local_f_solve(A, B, C, n: int, rho: float) -> np.ndarray:
    """Solve A F B + n*rho*F = C: the per-user precoder minimizer."""
    return sylvester_solve(A, B, n * rho, C)


def f_aggregate(f_hats) -> np.ndarray:
    """Federated averaging of the per-user precoder solutions."""
    stack = np.stack([np.asarray(F) for F in f_hats])
    if any(F.shape != stack[0].shape for F in stack):
        raise ValueError("per-user precoders must share one shape")
    return stack.mean(axis=0)


def f_aggregate_exact(grams, rhs, B, n: int, rho: float) -> np.ndarray:
    """Exact joint precoder-block minimizer.

    B is common to all users, so the stationarity conditions sum into a single
    Sylvester system (sum_l A_l) F B + L*n*rho*F = sum_l C_l.
    """
    A = np.sum(np.stack(list(grams)), axis=0)
    C = np.sum(np.stack(list(rhs)), axis=0)
    return sylvester_solve(A, B, len(grams) * n * rho, C)


def z_update(F, U, power_budget: float) -> np.ndarray:
    """Project F + U onto the transmit-power ball."""
    return trace_ball_project(F + U, power_budget)


def u_update(U, F, Z) -> np.ndarray:
    """Scaled dual ascent: U + F - Z."""
    if U.shape != F.shape or F.shape != Z.shape:
        raise ValueError("U, F, Z must share one shape")
    return U + F - Z


def init_precoder(shape, power_budget: float, rng: np.random.Generator) -> np.ndarray:
    """CN(0,1) initialization rescaled to sit exactly on the power budget."""
    F = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return F * np.sqrt(power_budget / np.sum(np.abs(F) ** 2))


def _check_finite(M, step: str):
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise FloatingPointError(f"non-finite iterate after {step}")


def run_centralized(problem: AlignmentProblem, iterations: int = 30,
                    rng: np.random.Generator | None = None,
                    F0: np.ndarray | None = None,
                    aggregation: str = "fedavg",
                    stop_tol: float | None = None,
                    skip_g_step: bool = False,
                    equalizers: list | None = None,
                    record_iterates: bool = False) -> AdmmState:
    """Reference ADMM loop: G-step, per-user F solves, aggregate, Z, U.

    ``skip_g_step`` freezes externally supplied ``equalizers`` (used by the
    baseline precoder fit).  ``stop_tol`` enables an optional early stop when
    both residuals fall below it; by default the loop runs the full budget.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if aggregation not in ("fedavg", "exact"):
        raise ValueError(f"unknown aggregation mode {aggregation!r}")
    if F0 is None:
        if rng is None:
            raise ValueError("pass either F0 or an rng for initialization")
        F0 = init_precoder(problem.precoder_shape, problem.power_budget, rng)
    L, n, rho = problem.num_users, problem.n, problem.rho
    F = np.array(F0, dtype=complex)
    Z = np.zeros_like(F)
    U = np.zeros_like(F)
    B = problem.gram()
    Gs = list(equalizers) if equalizers is not None else [None] * L

    state = AdmmState(F=F, Z=Z, U=U, equalizers=Gs)
    for t in range(1, iterations + 1):
        if not skip_g_step:
            for l, (Y, ch) in enumerate(zip(problem.targets, problem.channels)):
                M = ch.lifted @ (F @ problem.X)
                Gs[l] = g_update(Y, M, n, ch.noise_variance)
                _check_finite(Gs[l], f"G-step (user {l}, t={t})")
        grams, rhs = [], []
        for Y, ch, G in zip(problem.targets, problem.channels, Gs):
            A, C = local_f_ingredients(G, ch.lifted, problem.X, Y, Z, U, n, rho)
            grams.append(A)
            rhs.append(C)
        if aggregation == "exact":
            F = f_aggregate_exact(grams, rhs, B, n, rho)
        else:
            F = f_aggregate([local_f_solve(A, B, C, n, rho)
                             for A, C in zip(grams, rhs)])
        _check_finite(F, f"F-step (t={t})")
        Z_prev = Z
        Z = z_update(F, U, problem.power_budget)
        assert np.sum(np.abs(Z) ** 2) <= problem.power_budget + 1e-12
        U = u_update(U, F, Z)
        _check_finite(U, f"U-step (t={t})")

        state.F, state.Z, state.U, state.t = F, Z, U, t
        if record_iterates:
            state.iterates.append(F.copy())
        primal = float(np.linalg.norm(F - Z))
        dual = rho * float(np.linalg.norm(Z - Z_prev))
        state.trace.append(IterationRecord(
            t=t,
            objective=objective_value(problem, F, Gs),
            primal_residual=primal,
            dual_residual=dual,
        ))
        if stop_tol is not None and primal < stop_tol and dual < stop_tol:
            break
    return state
