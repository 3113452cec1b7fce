"""Experiment orchestration.

Configuration, the per-seed experiment pipeline for every method (federated,
multi-link, First-K, Top-K), metric computation (network MSE and the
nearest-centroid proxy accuracy), parameter sweeps, and CSV reporting.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, fields, replace
from itertools import product

import numpy as np

from . import baselines
from .admm import AlignmentProblem, run_centralized
from .channel import MimoChannel, noise_sigma_from_snr, sample_rayleigh, transmit
from .federation import ApNode, UserNode, handshake, run_federated
from .linalg import whiten, unwhiten
from .rng import substream
from .semantic import (
    Population,
    PopulationConfig,
    RealLatentSet,
    generate_population,
    pair_to_complex,
    pilot_indices,
    unpair_to_real,
)

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "CSV_HEADER",
    "network_mse",
    "centroid_fit",
    "centroid_predict",
    "run_experiment",
    "run_sweep",
    "emit_summary",
]

METHODS = ("federated", "multilink", "first_k", "top_k")
DEFAULT_SEEDS = (27, 42, 100, 123, 144, 200)

CSV_HEADER = [
    "seed", "method", "L", "K", "N_T", "N_R", "snr_db", "zeta",
    "pilot_fraction", "heterogeneity", "network_mse", "accuracy",
    "downlink_payload", "uplink_payload", "wall_ms", "iterations_run",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; every field maps to a config-file key."""

    method: str = "federated"
    L: int = 10
    source_dim: int = 32
    ap_dim: int = 64
    user_dims: tuple = ()
    num_classes: int = 10
    samples: int = 1000
    heterogeneity: str = "heterogeneous"
    perturbation: float = 0.1
    nonlinearity: bool = False
    class_radius: float = 2.0
    within_class_std: float = 0.3
    latent_noise_std: float = 0.1
    spectrum_decay: float = 0.9
    N_T: int = 4
    N_R: int = 4
    K: int = 0            # 0 means "derive from zeta"
    zeta: float = 0.25
    snr_db: float = 20.0
    P_T: float = 1.0
    rho: float = 1.0
    T: int = 30
    aggregation: str = "fedavg"
    csi: bool = True
    pilot_fraction: float = 1.0
    train_fraction: float = 0.8
    stratified_pilots: bool = False
    seeds: tuple = DEFAULT_SEEDS
    output: str = "results.csv"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; pick one of {METHODS}")
        if self.ap_dim % 2 != 0:
            raise ValueError("ap_dim must be even (pad odd dims upstream)")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.user_dims:
            object.__setattr__(
                self, "user_dims", tuple(int(m) for m in self.user_dims)
            )

    @property
    def channel_uses(self) -> int:
        """K, derived from zeta when not pinned explicitly."""
        if self.K:
            return self.K
        return max(1, round(self.zeta * self.ap_dim / 2))

    @property
    def zeta_actual(self) -> float:
        return self.channel_uses / (self.ap_dim / 2)

    def population_config(self, seed: int) -> PopulationConfig:
        return PopulationConfig(
            num_users=self.L,
            source_dim=self.source_dim,
            ap_dim=self.ap_dim,
            user_dims=self.user_dims,
            num_classes=self.num_classes,
            samples=self.samples,
            heterogeneity=self.heterogeneity,
            perturbation=self.perturbation,
            nonlinearity=self.nonlinearity,
            class_radius=self.class_radius,
            within_class_std=self.within_class_std,
            latent_noise_std=self.latent_noise_std,
            spectrum_decay=self.spectrum_decay,
            master_seed=seed,
        )


_BOOL_KEYS = {"nonlinearity", "csi", "stratified_pilots"}
_TUPLE_KEYS = {"user_dims", "seeds"}


def _coerce(key: str, value):
    if isinstance(value, str):
        value = value.strip()
        if key in _BOOL_KEYS:
            return value.lower() in ("1", "true", "yes", "on")
        if key in _TUPLE_KEYS:
            return tuple(int(v) for v in value.replace(",", " ").split()) if value else ()
        proto = {f.name: f for f in fields(ExperimentConfig)}[key]
        if proto.type in ("int", int):
            return int(value)
        if proto.type in ("float", float):
            return float(value)
    return value


def config_from_mapping(pairs: dict) -> ExperimentConfig:
    valid = {f.name for f in fields(ExperimentConfig)}
    unknown = set(pairs) - valid
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in pairs.items()})


def load_config(path) -> ExperimentConfig:
    """Read a `key = value` text file mirroring the config field names."""
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            pairs[key] = value
    return config_from_mapping(pairs)


@dataclass(frozen=True)
class MetricsRecord:
    """One sweep-point result row."""

    seed: int
    method: str
    L: int
    K: int
    N_T: int
    N_R: int
    snr_db: float
    zeta: float
    pilot_fraction: float
    heterogeneity: str
    network_mse: float
    accuracy: float
    downlink_payload: int
    uplink_payload: int
    wall_ms: float
    iterations_run: int

    def row(self) -> list:
        return [getattr(self, k) for k in CSV_HEADER]


def network_mse(targets, predictions) -> float:
    """(1/L) sum_l (1/n) ||Y_l - Yhat_l||_F^2 over matched test columns."""
    if len(targets) != len(predictions):
        raise ValueError("need one prediction block per target block")
    total = 0.0
    for Y, Yh in zip(targets, predictions):
        if Y.shape != Yh.shape:
            raise ValueError(f"shape mismatch {Y.shape} vs {Yh.shape}")
        total += float(np.sum(np.abs(Y - Yh) ** 2)) / Y.shape[1]
    return total / len(targets)


@dataclass(frozen=True)
class CentroidClassifier:
    classes: np.ndarray
    centroids: np.ndarray  # num_classes x dim


def centroid_fit(features: np.ndarray, labels: np.ndarray) -> CentroidClassifier:
    """Per-class mean in the native latent space."""
    classes = np.unique(labels)
    expected = np.arange(labels.max() + 1)
    if classes.size != expected.size:
        missing = sorted(set(expected) - set(classes))
        raise ValueError(f"classes missing from training data: {missing}")
    cents = np.stack([features[:, labels == c].mean(axis=1) for c in classes])
    return CentroidClassifier(classes=classes, centroids=cents)


def centroid_predict(clf: CentroidClassifier, points: np.ndarray) -> np.ndarray:
    """Nearest centroid in Euclidean distance; ties go to the lowest class id."""
    d2 = (
        np.sum(points ** 2, axis=0)[None, :]
        - 2 * clf.centroids @ points
        + np.sum(clf.centroids ** 2, axis=1)[:, None]
    )
    return clf.classes[np.argmin(d2, axis=0)]


# ---------------------------------------------------------------------------
# per-seed pipeline

@dataclass
class _Prepared:
    """Whitened/paired train and test views shared by all methods."""

    X_train: np.ndarray          # complex d/2 x n_train
    X_test: np.ndarray
    X_train_real: np.ndarray     # whitened real views (for the baselines)
    X_test_real: np.ndarray
    Y_train: list                # per-user complex m_l/2 x n_train
    Y_test_real: list            # per-user whitened real test targets
    user_whiteners: list         # (mean, W) per user
    native_train: list           # per-user native train latents
    train_labels: np.ndarray
    test_labels: np.ndarray
    channels: list


def _prepare_seed(cfg: ExperimentConfig, seed: int) -> _Prepared:
    pop = generate_population(cfg.population_config(seed))
    n = pop.ap.n

    perm = substream(seed, "train-test-split").permutation(n)
    n_train = int(round(cfg.train_fraction * n))
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    if cfg.pilot_fraction < 1.0:
        labels = pop.ap.labels[train_idx] if cfg.stratified_pilots else None
        sub = pilot_indices(train_idx.size, cfg.pilot_fraction, seed, labels=labels)
        train_idx = train_idx[sub]

    ap_train, ap_test = pop.ap.take(train_idx), pop.ap.take(test_idx)
    Xw_train, mean, W = whiten(ap_train.features)
    Xw_test = W @ (ap_test.features - mean)

    def as_complex(mat, labels, agent):
        return pair_to_complex(
            RealLatentSet(features=mat, labels=labels, agent_id=agent)
        ).features

    sigma2 = noise_sigma_from_snr(cfg.snr_db, cfg.P_T)
    K = cfg.channel_uses
    channels, Y_train, Y_test_real, whiteners, native_train = [], [], [], [], []
    for l, user in enumerate(pop.users):
        u_train, u_test = user.take(train_idx), user.take(test_idx)
        Yw_train, mu, Wu = whiten(u_train.features)
        Yw_test = Wu @ (u_test.features - mu)
        Y_train.append(as_complex(Yw_train, u_train.labels, user.agent_id))
        Y_test_real.append(Yw_test)
        whiteners.append((mu, Wu))
        native_train.append(u_train)
        base = sample_rayleigh(cfg.N_R, cfg.N_T, substream(seed, "channel", l))
        channels.append(MimoChannel(base=base, uses=K, noise_variance=sigma2))

    return _Prepared(
        X_train=as_complex(Xw_train, ap_train.labels, "ap"),
        X_test=as_complex(Xw_test, ap_test.labels, "ap"),
        X_train_real=Xw_train,
        X_test_real=Xw_test,
        Y_train=Y_train,
        Y_test_real=Y_test_real,
        user_whiteners=whiteners,
        native_train=native_train,
        train_labels=ap_train.labels,
        test_labels=ap_test.labels,
        channels=channels,
    )


def _unpair(mat: np.ndarray) -> np.ndarray:
    return np.vstack([mat.real, mat.imag])


def _evaluate(cfg, seed, prep: _Prepared, predictions_real: list) -> tuple:
    """Network MSE in the whitened domain; accuracy in each native space."""
    mse = network_mse(prep.Y_test_real, predictions_real)
    accs = []
    for l, pred in enumerate(predictions_real):
        mu, Wu = prep.user_whiteners[l]
        native_pred = unwhiten(pred, mu, Wu)
        clf = centroid_fit(prep.native_train[l].features, prep.native_train[l].labels)
        labels = centroid_predict(clf, native_pred)
        accs.append(float(np.mean(labels == prep.test_labels)))
    return mse, float(np.mean(accs))


def _run_federated(cfg, seed, prep: _Prepared):
    ap = ApNode(
        X=prep.X_train, power_budget=cfg.P_T, rho=cfg.rho,
        rng=substream(seed, "precoder-init"),
        aggregation=cfg.aggregation, csi=cfg.csi,
        channels={l: ch for l, ch in enumerate(prep.channels)},
    )
    users = [UserNode(l, prep.Y_train[l], prep.channels[l])
             for l in range(cfg.L)]
    state, ledger, _ = run_federated(handshake(ap, users), iterations=cfg.T)
    F = state.deployed_precoder(cfg.P_T)
    preds = []
    for l, ch in enumerate(prep.channels):
        rx = transmit(ch, F @ prep.X_test, substream(seed, "eval-noise", l))
        preds.append(_unpair(state.equalizers[l] @ rx))
    return preds, ledger.total("downlink"), ledger.total("uplink"), state.t


def _run_multilink(cfg, seed, prep: _Prepared):
    """L independent single-user links, each with its own precoder."""
    preds, down, up, iters = [], 0, 0, 0
    for l, ch in enumerate(prep.channels):
        ap = ApNode(
            X=prep.X_train, power_budget=cfg.P_T, rho=cfg.rho,
            rng=substream(seed, "precoder-init", l),
            aggregation=cfg.aggregation, csi=cfg.csi, channels={l: ch},
        )
        user = UserNode(l, prep.Y_train[l], ch)
        state, ledger, _ = run_federated(handshake(ap, [user]), iterations=cfg.T)
        F = state.deployed_precoder(cfg.P_T)
        rx = transmit(ch, F @ prep.X_test, substream(seed, "eval-noise", l))
        preds.append(_unpair(state.equalizers[0] @ rx))
        down += ledger.total("downlink")
        up += ledger.total("uplink")
        iters = state.t
    return preds, down, up, iters


def _run_selection(cfg, seed, prep: _Prepared, kind: str):
    """First-K / Top-K pipeline: select, precode, equalize, align.

    The keep-count is clamped to the AP dimension, so sweep points whose
    channel budget exceeds d run as lossless selection.
    """
    d = prep.X_train_real.shape[0]
    K = cfg.channel_uses
    slots = K * cfg.N_T                       # complex symbols per sample
    keep = min(2 * slots, d)
    encode = baselines.first_k_encode if kind == "first_k" else baselines.top_k_encode

    def pair_padded(code):
        half = code.values.shape[0] // 2
        vals = code.values
        if vals.shape[0] % 2:                 # odd keep-count: pad one row
            vals = np.vstack([vals, np.zeros((1, vals.shape[1]))])
            half = vals.shape[0] // 2
        z = vals[:half] + 1j * vals[half:]
        padded = np.zeros((slots, z.shape[1]), dtype=complex)
        padded[: z.shape[0], :] = z
        return z.shape[0], padded

    train_code = encode(prep.X_train_real, keep)
    test_code = encode(prep.X_test_real, keep)
    used, tx_train = pair_padded(train_code)
    _, tx_test = pair_padded(test_code)

    eqs = [baselines.svd_mmse_equalizer(ch.base, cfg.snr_db, K)
           for ch in prep.channels]
    F = baselines.baseline_precoder(
        tx_train, prep.channels, eqs, cfg.P_T, rho=cfg.rho, iterations=cfg.T,
        rng=substream(seed, "precoder-init"),
    )

    aligners = [
        baselines.lsq_align(prep.X_train_real, _unpair(prep.Y_train[l]))
        for l in range(cfg.L)
    ]

    preds = []
    for l, ch in enumerate(prep.channels):
        rx = transmit(ch, F @ tx_test, substream(seed, "eval-noise", l))
        z_hat = (eqs[l] @ rx)[:used, :]
        vals = np.vstack([z_hat.real, z_hat.imag])[: test_code.values.shape[0], :]
        code = replace(test_code, values=vals)
        s_hat = (baselines.first_k_decode(code) if kind == "first_k"
                 else baselines.top_k_decode(code))
        preds.append(aligners[l].matrix @ s_hat)
    return preds, 0, 0, cfg.T


_RUNNERS = {
    "federated": _run_federated,
    "multilink": _run_multilink,
    "first_k": lambda c, s, p: _run_selection(c, s, p, "first_k"),
    "top_k": lambda c, s, p: _run_selection(c, s, p, "top_k"),
}


def run_experiment(cfg: ExperimentConfig, seeds=None) -> list:
    """One MetricsRecord per seed; a failing seed aborts with a diagnostic
    while the remaining seeds still run."""
    records, errors = [], []
    for seed in (seeds if seeds is not None else cfg.seeds):
        t0 = time.perf_counter()
        try:
            prep = _prepare_seed(cfg, seed)
            preds, down, up, iters = _RUNNERS[cfg.method](cfg, seed, prep)
            mse, acc = _evaluate(cfg, seed, prep, preds)
        except Exception as exc:  # keep the sweep alive, report at the end
            errors.append(f"seed {seed}: {type(exc).__name__}: {exc}")
            continue
        records.append(MetricsRecord(
            seed=seed, method=cfg.method, L=cfg.L, K=cfg.channel_uses,
            N_T=cfg.N_T, N_R=cfg.N_R, snr_db=cfg.snr_db,
            zeta=cfg.zeta_actual, pilot_fraction=cfg.pilot_fraction,
            heterogeneity=cfg.heterogeneity, network_mse=mse, accuracy=acc,
            downlink_payload=down, uplink_payload=up,
            wall_ms=1000.0 * (time.perf_counter() - t0), iterations_run=iters,
        ))
    if errors and not records:
        raise RuntimeError("all seeds failed:\n" + "\n".join(errors))
    for msg in errors:
        print(f"warning: {msg}")
    return records


def run_sweep(cfg: ExperimentConfig, axes: dict, methods=None,
              out_path=None, progress=None) -> list:
    """Cartesian product of axis values x methods x seeds, written incrementally.

    ``axes`` maps config field names to value lists (e.g. {"zeta": [...]}).
    Partial CSV output is preserved if a point aborts.
    """
    if not axes and methods is None:
        raise ValueError("sweep needs at least one axis or a method list")
    methods = list(methods) if methods is not None else [cfg.method]
    out_path = out_path or cfg.output
    names = list(axes)
    records = []
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for values in product(*(axes[k] for k in names)) if names else [()]:
            point = replace(cfg, **dict(zip(names, values)))
            for method in methods:
                mcfg = replace(point, method=method)
                if progress:
                    progress(dict(zip(names, values)), method)
                for rec in run_experiment(mcfg):
                    writer.writerow(rec.row())
                    records.append(rec)
                fh.flush()
    return records


def read_records(path) -> list:
    """Load MetricsRecords back from a sweep CSV."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(MetricsRecord(
                seed=int(row["seed"]), method=row["method"], L=int(row["L"]),
                K=int(row["K"]), N_T=int(row["N_T"]), N_R=int(row["N_R"]),
                snr_db=float(row["snr_db"]), zeta=float(row["zeta"]),
                pilot_fraction=float(row["pilot_fraction"]),
                heterogeneity=row["heterogeneity"],
                network_mse=float(row["network_mse"]),
                accuracy=float(row["accuracy"]),
                downlink_payload=int(row["downlink_payload"]),
                uplink_payload=int(row["uplink_payload"]),
                wall_ms=float(row["wall_ms"]),
                iterations_run=int(row["iterations_run"]),
            ))
    return records


GROUP_KEYS = ("method", "zeta", "heterogeneity", "pilot_fraction", "snr_db")


def emit_summary(records: list, csv_path=None):
    """Mean/std across seeds per (method, zeta, ...) group.

    Returns (header, rows) and optionally writes the CSV form.
    """
    if not records:
        raise ValueError("no records to summarize")
    groups = {}
    for rec in records:
        key = tuple(getattr(rec, k) for k in GROUP_KEYS)
        groups.setdefault(key, []).append(rec)
    header = list(GROUP_KEYS) + [
        "n_seeds", "mse_mean", "mse_std", "acc_mean", "acc_std",
    ]
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        mses = np.array([r.network_mse for r in rs])
        accs = np.array([r.accuracy for r in rs])
        rows.append(list(key) + [
            len(rs),
            float(mses.mean()), float(mses.std()),
            float(accs.mean()), float(accs.std()),
        ])
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return header, rows


def format_summary(header, rows) -> str:
    widths = [max(len(str(h)), *(len(_fmt(r[i])) for r in rows))
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(_fmt(v).ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)
