"""Latent-space data model.

Real/complex pairing, labelled latent sets for the access point and the
users, the synthetic multi-agent population generator that stands in for
pretrained vision backbones, pilot subsampling, and a line-oriented text
format for externally produced embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import substream

__all__ = [
    "RealLatentSet",
    "ComplexLatentSet",
    "PopulationConfig",
    "Population",
    "pair_to_complex",
    "unpair_to_real",
    "ensure_even_dim",
    "generate_population",
    "pilot_indices",
    "subsample_pilots",
    "save_latent_set",
    "load_latent_set",
]


@dataclass(frozen=True)
class RealLatentSet:
    """A dim x n matrix of real semantic feature columns with class labels."""

    features: np.ndarray
    labels: np.ndarray
    agent_id: str = "agent"
    padded: bool = False  # True when a zero row was appended to make dim even

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        lab = np.asarray(self.labels, dtype=int)
        if f.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not np.all(np.isfinite(f)):
            raise ValueError("features contain non-finite entries")
        if lab.shape != (f.shape[1],):
            raise ValueError(
                f"label count {lab.shape} does not match sample count {f.shape[1]}"
            )
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", lab)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "RealLatentSet":
        """Column subset (shared index sets keep agents in correspondence)."""
        return replace(self, features=self.features[:, idx], labels=self.labels[idx])


@dataclass(frozen=True)
class ComplexLatentSet:
    """Paired complex view of a real latent set (dim = real dim / 2)."""

    features: np.ndarray
    labels: np.ndarray
    agent_id: str = "agent"

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]


def ensure_even_dim(s: RealLatentSet) -> RealLatentSet:
    """Zero-pad one feature row when the dimension is odd; record the pad."""
    if s.dim % 2 == 0:
        return s
    padded = np.vstack([s.features, np.zeros((1, s.n))])
    return replace(s, features=padded, padded=True)


def pair_to_complex(s: RealLatentSet) -> ComplexLatentSet:
    """Pair the first half of each column with the second half into complex symbols."""
    if s.dim % 2 != 0:
        raise ValueError(f"dimension {s.dim} is odd; pad with ensure_even_dim first")
    h = s.dim // 2
    z = s.features[:h, :] + 1j * s.features[h:, :]
    return ComplexLatentSet(features=z, labels=s.labels, agent_id=s.agent_id)


def unpair_to_real(c: ComplexLatentSet) -> RealLatentSet:
    """Exact inverse of :func:`pair_to_complex`."""
    f = np.vstack([c.features.real, c.features.imag])
    return RealLatentSet(features=f, labels=c.labels, agent_id=c.agent_id)


@dataclass(frozen=True)
class PopulationConfig:
    """Knobs for the synthetic multi-agent latent-space generator."""

    num_users: int = 10
    source_dim: int = 16
    ap_dim: int = 64
    user_dims: tuple = ()
    num_classes: int = 10
    samples: int = 1000
    heterogeneity: str = "heterogeneous"  # homogeneous | heterogeneous | mixed
    perturbation: float = 0.1  # scale of per-user map deltas in homogeneous mode
    nonlinearity: bool = False
    class_radius: float = 1.0
    within_class_std: float = 0.3
    latent_noise_std: float = 0.0  # per-agent private noise on the latents
    spectrum_decay: float = 1.0    # geometric decay of user-map singular values
    master_seed: int = 0

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("need at least one user")
        if self.source_dim < 2 or self.ap_dim < 2:
            raise ValueError("dims must be >= 2")
        if self.samples < self.num_classes:
            raise ValueError("need at least one sample per class")
        if self.heterogeneity not in ("homogeneous", "heterogeneous", "mixed"):
            raise ValueError(f"unknown heterogeneity mode {self.heterogeneity!r}")
        dims = self.user_dims or default_user_dims(self.num_users)
        if len(dims) != self.num_users:
            raise ValueError("user_dims length must equal num_users")
        if any(m < 2 for m in dims):
            raise ValueError("user dims must be >= 2")
        object.__setattr__(self, "user_dims", tuple(int(m) for m in dims))


def default_user_dims(num_users: int) -> tuple:
    """Even user dims spread over [32, 96], mirroring mismatched backbones."""
    dims = np.linspace(32, 96, num_users)
    return tuple(int(2 * round(d / 2)) for d in dims)


@dataclass(frozen=True)
class Population:
    """One synthetic draw: AP latents plus per-user latents over shared samples."""

    ap: RealLatentSet
    users: tuple
    config: PopulationConfig = field(repr=False, default=None)


def _squash(x: np.ndarray, scale: float = 3.0) -> np.ndarray:
    # smooth, monotone, near-identity around the origin
    return scale * np.tanh(x / scale)


def _agent_latents(source, M, b, nonlinear: bool) -> np.ndarray:
    z = M @ source + b[:, None]
    return _squash(z) if nonlinear else z


def generate_population(cfg: PopulationConfig) -> Population:
    """Draw a multi-agent latent population from the Gaussian-mixture model.

    Source vectors come from a mixture with class means uniform on a sphere of
    radius ``class_radius`` in R^source_dim and isotropic within-class noise.
    Every agent (AP and users) owns an affine map applied to the *same*
    underlying source per column, so cross-agent pilot correspondence is
    exact.  Homogeneous mode perturbs a shared base user map by
    ``perturbation``; heterogeneous mode draws independent maps; mixed mode
    does the first half homogeneous and the rest independent.

    ``latent_noise_std`` adds private per-agent noise on top of each map.
    Without it, whitened linear latents are perfectly correlated across
    agents (every cross-covariance is a co-isometry), which collapses the
    homogeneous/heterogeneous axis; a little private noise restores the
    non-flat correlation spectra of real encoder latents.
    """
    seed = cfg.master_seed
    p, d, n, C = cfg.source_dim, cfg.ap_dim, cfg.samples, cfg.num_classes

    rng = substream(seed, "class-means")
    means = rng.standard_normal((C, p))
    means *= cfg.class_radius / np.linalg.norm(means, axis=1, keepdims=True)

    labels = substream(seed, "labels").integers(0, C, size=n)
    source = means[labels].T + cfg.within_class_std * substream(
        seed, "source"
    ).standard_normal((p, n))

    def draw_map(role: str, index: int, rows: int, shaped: bool = False):
        g = substream(seed, role, index)
        M = g.standard_normal((rows, p)) / np.sqrt(p)
        b = 0.1 * g.standard_normal(rows)
        if shaped and cfg.spectrum_decay < 1.0:
            # geometric singular-value decay along agent-specific source
            # directions; normalized to keep the overall latent scale
            w = cfg.spectrum_decay ** np.arange(p)
            w = w / np.sqrt(np.mean(w ** 2))
            R = np.linalg.qr(g.standard_normal((p, p)))[0]
            M = M @ (R * w) @ R.T
        return M, b

    def private_noise(role_index: int, rows: int):
        if cfg.latent_noise_std == 0:
            return 0.0
        g = substream(seed, "latent-noise", role_index)
        return cfg.latent_noise_std * g.standard_normal((rows, n))

    M_ap, b_ap = draw_map("ap-map", 0, d)
    ap = RealLatentSet(
        features=_agent_latents(source, M_ap, b_ap, cfg.nonlinearity)
        + private_noise(0, d),
        labels=labels,
        agent_id="ap",
    )

    m_max = max(cfg.user_dims)
    M_base, b_base = draw_map("user-base-map", 0, m_max, shaped=True)

    users = []
    for l, m_l in enumerate(cfg.user_dims):
        shared = cfg.heterogeneity == "homogeneous" or (
            cfg.heterogeneity == "mixed" and l < cfg.num_users // 2
        )
        if shared:
            # shared base, small per-user delta; differing dims take the
            # leading m_l rows of the common map
            dM, db = draw_map("user-delta-map", l, m_max)
            M = M_base[:m_l] + cfg.perturbation * dM[:m_l]
            b = b_base[:m_l] + cfg.perturbation * db[:m_l]
        else:
            M, b = draw_map("user-map", l, m_l, shaped=True)
        users.append(
            RealLatentSet(
                features=_agent_latents(source, M, b, cfg.nonlinearity)
                + private_noise(l + 1, m_l),
                labels=labels,
                agent_id=f"user{l}",
            )
        )
    return Population(ap=ap, users=tuple(users), config=cfg)


def pilot_indices(n: int, fraction: float, seed: int, labels=None) -> np.ndarray:
    """Column index set for pilot subsampling (shared across all agents).

    Uniform without replacement by default; pass ``labels`` to stratify the
    draw per class instead.  ``fraction=1.0`` keeps the original order.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    keep = int(np.ceil(fraction * n))
    if keep < 1:
        raise ValueError("subsampling would produce an empty pilot set")
    if fraction == 1.0:
        return np.arange(n)
    rng = substream(seed, "pilot-subsample")
    if labels is None:
        return np.sort(rng.choice(n, size=keep, replace=False))
    idx = []
    labels = np.asarray(labels)
    for c in np.unique(labels):
        cols = np.flatnonzero(labels == c)
        k = max(1, int(round(fraction * cols.size)))
        idx.append(rng.choice(cols, size=min(k, cols.size), replace=False))
    return np.sort(np.concatenate(idx))


def subsample_pilots(s: RealLatentSet, fraction: float, seed: int,
                     stratified: bool = False) -> RealLatentSet:
    """Keep ceil(fraction*n) columns chosen by :func:`pilot_indices`."""
    idx = pilot_indices(s.n, fraction, seed, labels=s.labels if stratified else None)
    return s.take(idx)


_MAGIC = "SEMLAT v1"


def save_latent_set(s: RealLatentSet, path) -> None:
    """Write the line-oriented SEMLAT v1 text format (full repr precision)."""
    with open(path, "w") as fh:
        fh.write(f"{_MAGIC} {s.dim} {s.n} {int(s.labels.max()) + 1 if s.n else 0}\n")
        fh.write(" ".join(str(int(x)) for x in s.labels) + "\n")
        for row in s.features:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_latent_set(path, agent_id: str = "agent") -> RealLatentSet:
    """Parse a SEMLAT v1 file, naming the offending line on format errors."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or " ".join(header[:2]) != _MAGIC:
            raise ValueError(f"{path}: line 1: bad header {' '.join(header)!r}")
        dim, n, num_classes = (int(x) for x in header[2:])
        labels = np.array(fh.readline().split(), dtype=int)
        if labels.shape != (n,):
            raise ValueError(f"{path}: line 2: expected {n} labels, got {labels.size}")
        if num_classes and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"{path}: line 2: label outside [0, {num_classes})")
        rows = []
        for i in range(dim):
            vals = fh.readline().split()
            if len(vals) != n:
                raise ValueError(
                    f"{path}: line {i + 3}: expected {n} values, got {len(vals)}"
                )
            rows.append(np.array(vals, dtype=float))
    return RealLatentSet(features=np.array(rows), labels=labels, agent_id=agent_id)
