"""MIMO flat Rayleigh fading channel model.

Channel sampling, the block-diagonal lift across K channel uses, the adopted
SNR(dB) -> noise-variance convention, and noisy transmission.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MimoChannel",
    "sample_rayleigh",
    "lift",
    "noise_sigma_from_snr",
    "sample_complex_noise",
    "transmit",
]


def sample_rayleigh(n_r: int, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an N_R x N_T matrix with i.i.d. CN(0,1) entries (unit variance)."""
    if n_r < 1 or n_t < 1:
        raise ValueError("antenna counts must be >= 1")
    re = rng.standard_normal((n_r, n_t))
    im = rng.standard_normal((n_r, n_t))
    return (re + 1j * im) / np.sqrt(2.0)


def lift(base: np.ndarray, uses: int) -> np.ndarray:
    """Block-diagonal lift I_K kron base covering K consecutive channel uses."""
    if uses < 1:
        raise ValueError("channel-use count must be >= 1")
    return np.kron(np.eye(uses), base)


def noise_sigma_from_snr(snr_db: float, power_budget: float) -> float:
    """Adopted convention: sigma^2 = 10^(-SNR/10) * P_T, isotropic per entry."""
    if power_budget <= 0:
        raise ValueError("power budget must be positive")
    return 10.0 ** (-snr_db / 10.0) * power_budget


@dataclass(frozen=True)
class MimoChannel:
    """One user's channel: base matrix, use count, lift, and noise variance.

    Constant across the K uses of one transmission and across all iterations
    of one experiment; resampled only between seeded repetitions.
    """

    base: np.ndarray
    uses: int
    noise_variance: float
    lifted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")
        object.__setattr__(self, "lifted", lift(self.base, self.uses))

    @property
    def n_r(self) -> int:
        return self.base.shape[0]

    @property
    def n_t(self) -> int:
        return self.base.shape[1]


def sample_complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, sigma2) array; exactly zero in noiseless test mode."""
    if sigma2 == 0:
        return np.zeros(shape, dtype=complex)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(sigma2 / 2.0) * (re + 1j * im)


def transmit(channel: MimoChannel, x_tx: np.ndarray,
             rng: np.random.Generator) -> np.ndarray:
    """Apply the lifted channel and additive noise to a block of columns."""
    x_tx = np.asarray(x_tx)
    expect = channel.uses * channel.n_t
    if x_tx.shape[0] != expect:
        raise ValueError(
            f"transmit expects {expect} rows (K*N_T), got {x_tx.shape[0]}"
        )
    noise = sample_complex_noise(
        (channel.uses * channel.n_r, x_tx.shape[1]), channel.noise_variance, rng
    )
    return channel.lifted @ x_tx + noise
