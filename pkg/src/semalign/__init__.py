"""Federated latent-space alignment for multi-user downlink semantic MIMO.

A library and CLI simulator: shared pre-equalizer at the access point,
per-user equalizers trained over a message-passing protocol, MIMO Rayleigh
channels, comparison baselines, and a seeded experiment harness.
"""

from .admm import AlignmentProblem, AdmmState, run_centralized
from .channel import MimoChannel, noise_sigma_from_snr, sample_rayleigh, transmit
from .federation import ApNode, Session, UserNode, handshake, run_federated
from .harness import (
    ExperimentConfig,
    MetricsRecord,
    run_experiment,
    run_sweep,
)
from .semantic import (
    PopulationConfig,
    RealLatentSet,
    generate_population,
    load_latent_set,
    pair_to_complex,
    save_latent_set,
    unpair_to_real,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentProblem",
    "AdmmState",
    "run_centralized",
    "MimoChannel",
    "noise_sigma_from_snr",
    "sample_rayleigh",
    "transmit",
    "ApNode",
    "UserNode",
    "Session",
    "handshake",
    "run_federated",
    "ExperimentConfig",
    "MetricsRecord",
    "run_experiment",
    "run_sweep",
    "PopulationConfig",
    "RealLatentSet",
    "generate_population",
    "pair_to_complex",
    "unpair_to_real",
    "save_latent_set",
    "load_latent_set",
    "__version__",
]
