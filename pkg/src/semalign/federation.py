"""Message-level simulation of the federated alignment protocol.

An access-point node and user nodes exchange typed messages in synchronous
rounds: the AP broadcasts per-user downlink shares, users run their local
equalizer update and reply with the Gram/product pair needed for the shared
precoder update, and the AP closes the round with aggregation, power
projection, and the dual step.  A payload ledger counts every complex scalar
that crosses the air interface.  Raw user latents never leave a user node;
only pre-whitened projected products do.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import admm
from .admm import AdmmState, IterationRecord
from .channel import MimoChannel

__all__ = [
    "HandshakeMsg",
    "DownlinkShare",
    "UplinkShare",
    "PayloadLedger",
    "UserNode",
    "ApNode",
    "Session",
    "handshake",
    "run_federated",
]


@dataclass(frozen=True)
class HandshakeMsg:
    user_id: int
    latent_dim: int        # m_l, even after padding
    pilots_offered: int


@dataclass(frozen=True)
class DownlinkShare:
    """S_l = H_l F X under AP-side CSI, F X otherwise."""

    user_id: int
    shared_pilots: np.ndarray
    t: int


@dataclass(frozen=True)
class UplinkShare:
    """Per-user precoder ingredients: the Gram A_l and P_l = (G H)^H Y."""

    user_id: int
    gram: np.ndarray
    target_product: np.ndarray
    t: int


@dataclass
class PayloadLedger:
    """Complex-scalar counts per message, per iteration and direction."""

    entries: list = field(default_factory=list)  # (t, direction, user_id, count)

    def add(self, t: int, direction: str, user_id: int, count: int):
        self.entries.append((t, direction, user_id, count))

    def total(self, direction: str | None = None) -> int:
        return sum(c for (_, d, _, c) in self.entries
                   if direction is None or d == direction)

    def per_user(self, user_id: int) -> int:
        return sum(c for (_, _, u, c) in self.entries if u == user_id)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,direction,user_id,payload_complex_scalars\n")
            for t, d, u, c in self.entries:
                fh.write(f"{t},{d},{u},{c}\n")


class UserNode:
    """One receiver: holds its whitened paired targets, channel, and equalizer."""

    def __init__(self, user_id: int, targets: np.ndarray, channel: MimoChannel):
        self.user_id = int(user_id)
        self._targets = np.asarray(targets)
        self.channel = channel
        self.equalizer = None

    @property
    def n(self) -> int:
        return self._targets.shape[1]

    def handshake(self) -> HandshakeMsg:
        return HandshakeMsg(
            user_id=self.user_id,
            latent_dim=2 * self._targets.shape[0],
            pilots_offered=self.n,
        )

    def process_round(self, share: DownlinkShare, csi: bool) -> UplinkShare:
        """Local equalizer update, then the uplink Gram/product pair."""
        S = share.shared_pilots
        M = S if csi else self.channel.lifted @ S
        expect = self.channel.uses * self.channel.n_r
        if M.shape != (expect, self.n):
            raise ValueError(
                f"user {self.user_id}: share shape {S.shape} does not match "
                f"channel ({expect} receive rows, {self.n} pilots)"
            )
        self.equalizer = admm.g_update(
            self._targets, M, self.n, self.channel.noise_variance
        )
        GH = self.equalizer @ self.channel.lifted
        A = GH.conj().T @ GH
        A = 0.5 * (A + A.conj().T)
        P = GH.conj().T @ self._targets
        return UplinkShare(user_id=self.user_id, gram=A, target_product=P,
                           t=share.t)

    def diagnostic_loss(self, shared_pilots: np.ndarray) -> tuple:
        """Instrumentation only (not a protocol message, not in the ledger):
        squared fit error and equalizer energy for the objective trace."""
        R = self._targets - self.equalizer @ shared_pilots
        return float(np.sum(np.abs(R) ** 2)), float(
            np.sum(np.abs(self.equalizer) ** 2)
        )


class ApNode:
    """The access point: owns X, the shared precoder, and the ADMM state."""

    def __init__(self, X: np.ndarray, power_budget: float, rho: float,
                 rng: np.random.Generator, aggregation: str = "fedavg",
                 csi: bool = True, channels: dict | None = None):
        if aggregation not in ("fedavg", "exact"):
            raise ValueError(f"unknown aggregation mode {aggregation!r}")
        if csi and channels is None:
            raise ValueError("AP-side CSI requires the per-user channels")
        self.X = np.asarray(X)
        self.power_budget = float(power_budget)
        self.rho = float(rho)
        self.aggregation = aggregation
        self.csi = csi
        self.channels = dict(channels) if channels else {}
        self._rng = rng
        self.F = None
        self.Z = None
        self.U = None
        self._B = self.X @ self.X.conj().T

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def initialize(self, uses: int, n_t: int):
        shape = (uses * n_t, self.X.shape[0])
        self.F = admm.init_precoder(shape, self.power_budget, self._rng)
        self.Z = np.zeros_like(self.F)
        self.U = np.zeros_like(self.F)

    def downlink(self, user_id: int, t: int) -> DownlinkShare:
        FX = self.F @ self.X
        S = self.channels[user_id].lifted @ FX if self.csi else FX
        return DownlinkShare(user_id=user_id, shared_pilots=S, t=t)

    def update(self, uplinks: list, t: int):
        """Aggregate the round's uplink shares and advance F, Z, U."""
        n, rho = self.n, self.rho
        grams, rhs = [], []
        for up in uplinks:
            C = n * rho * (self.Z - self.U) + up.target_product @ self.X.conj().T
            grams.append(up.gram)
            rhs.append(C)
        if self.aggregation == "exact":
            self.F = admm.f_aggregate_exact(grams, rhs, self._B, n, rho)
        else:
            self.F = admm.f_aggregate(
                [admm.local_f_solve(A, self._B, C, n, rho)
                 for A, C in zip(grams, rhs)]
            )
        Z_prev = self.Z
        self.Z = admm.z_update(self.F, self.U, self.power_budget)
        assert np.sum(np.abs(self.Z) ** 2) <= self.power_budget + 1e-12
        self.U = admm.u_update(self.U, self.F, self.Z)
        return Z_prev


class Session:
    """A handshaken alignment session: fixed user order, CSI flag, ledger."""

    def __init__(self, ap: ApNode, users: list):
        self.ap = ap
        # aggregation is order-independent by construction, but a canonical
        # order makes runs bitwise identical under registration permutations
        self.users = sorted(users, key=lambda u: u.user_id)
        self.ledger = PayloadLedger()

    @property
    def num_users(self) -> int:
        return len(self.users)


def handshake(ap: ApNode, users: list) -> Session:
    """Register users with the AP; duplicate ids are rejected."""
    if not users:
        raise ValueError("need at least one user")
    seen = set()
    for u in users:
        msg = u.handshake()
        if msg.user_id in seen:
            raise ValueError(f"duplicate user_id {msg.user_id} in handshake")
        seen.add(msg.user_id)
        if msg.latent_dim % 2 != 0:
            raise ValueError(f"user {msg.user_id}: odd latent dim {msg.latent_dim}")
    session = Session(ap, users)
    ch = session.users[0].channel
    ap.initialize(ch.uses, ch.n_t)
    return session


def ap_broadcast(session: Session, t: int) -> list:
    """Downlink shares for iteration t, with ledger accounting."""
    shares = []
    for u in session.users:
        share = session.ap.downlink(u.user_id, t)
        session.ledger.add(t, "downlink", u.user_id, int(share.shared_pilots.size))
        shares.append(share)
    return shares


def ap_round(session: Session, uplinks: list, t: int):
    """Synchronous AP-side close of round t; aborts if any share is missing."""
    got = {up.user_id for up in uplinks}
    want = {u.user_id for u in session.users}
    if got != want:
        raise ValueError(
            f"round {t} incomplete: missing uplink shares from {sorted(want - got)}"
        )
    ordered = sorted(uplinks, key=lambda up: up.user_id)
    for up in ordered:
        session.ledger.add(
            t, "uplink", up.user_id, int(up.gram.size + up.target_product.size)
        )
    return session.ap.update(ordered, t)


def run_federated(session: Session, iterations: int = 30,
                  record_iterates: bool = False):
    """Run T synchronous rounds of the protocol.

    Returns the final state (precoder iterates plus the users' equalizers),
    the payload ledger, and the per-iteration objective/residual trace.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    ap = session.ap
    L, n = session.num_users, ap.n
    trace = []
    iterates = []
    for t in range(1, iterations + 1):
        shares = ap_broadcast(session, t)
        uplinks = [u.process_round(s, ap.csi) for u, s in zip(session.users, shares)]
        Z_prev = ap_round(session, uplinks, t)
        if record_iterates:
            iterates.append(ap.F.copy())

        data = 0.0
        noise = 0.0
        FX = ap.F @ ap.X
        for u in session.users:
            S = u.channel.lifted @ FX
            sq, energy = u.diagnostic_loss(S)
            data += sq
            noise += u.channel.noise_variance * energy
        trace.append(IterationRecord(
            t=t,
            objective=data / (L * n) + noise,
            primal_residual=float(np.linalg.norm(ap.F - ap.Z)),
            dual_residual=ap.rho * float(np.linalg.norm(ap.Z - Z_prev)),
        ))
    state = AdmmState(
        F=ap.F, Z=ap.Z, U=ap.U,
        equalizers=[u.equalizer for u in session.users],
        t=iterations, trace=trace, iterates=iterates,
    )
    return state, session.ledger, trace
