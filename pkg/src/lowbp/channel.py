"""BPSK over AWGN and channel LLR computation.

Noise is generated from a counter-based Philox stream through the inverse
Gaussian CDF, so every sample is a pure function of (seed, stream key) and
reproducible across platforms.  The generator identity string is stored in
all output artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

GENERATOR_ID = "philox4x64/inverse-cdf"


@dataclass(frozen=True)
class ChannelConfig:
    noise_variance: float
    seed: int

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")


def noise_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for a substream addressed by (seed, *key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF Gaussians from 53-bit uniforms strictly inside (0, 1)."""
    u = (rng.integers(0, 1 << 53, size=size, dtype=np.uint64) + 0.5) * 2.0**-53
    return ndtri(u)


def bpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Map bits {0,1} to symbols {-1,+1}."""
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    return 2.0 * bits - 1.0


def awgn_transmit(symbols: np.ndarray, cfg: ChannelConfig, *key: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise of variance sigma^2 from the seeded stream.

    Extra ``key`` integers address an independent substream (e.g. a frame
    index) so frames can be generated in any order or in parallel.
    """
    symbols = np.asarray(symbols, dtype=np.float64)
    rng = noise_rng(cfg.seed, *key)
    noise = np.sqrt(cfg.noise_variance) * standard_normal(rng, symbols.size)
    return symbols + noise.reshape(symbols.shape)


def channel_llr(received: np.ndarray, noise_variance: float) -> np.ndarray:
    """LLR log p(y|x=1)/p(y|x=0) = 2 y / sigma^2 for unit-energy BPSK."""
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    return 2.0 * np.asarray(received, dtype=np.float64) / noise_variance


def snr_to_sigma2(eb_n0_db: float, rate: float) -> float:
    """Per-dimension noise variance from Eb/N0 in dB at the given code rate.

    Convention: unit symbol energy, sigma^2 = 1 / (2 R 10^(x/10)).  Recorded
    in output files so curves remain interpretable under other conventions.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must be in (0, 1)")
    return 1.0 / (2.0 * rate * 10.0 ** (eb_n0_db / 10.0))
