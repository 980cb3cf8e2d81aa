"""Orthonormal 2D discrete cosine transform and frequency-domain neighbor
sampling.

The transform is the separable type-II DCT with orthonormal scaling (the
1/sqrt(2) factor on the zeroth basis vector folded in), applied per channel.
Orthonormality makes the pair exactly energy-preserving and the inverse exact
up to float rounding.

Neighbors of an adversarial image are gradient probes, produced by adding
pixel noise with std eps/255, multiplying every DCT coefficient by a fresh
Gaussian field centered at 1 with std sigma, and transforming back.  They are
deliberately not clipped to [0, 1]: they only ever feed gradient evaluation,
never the attack output.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .rng import RngStream


@dataclass(frozen=True)
class SpectralConfig:
    """Knobs of the frequency-neighbor sampler.

    sigma      std-dev of the multiplicative spectral noise
    n_samples  number of neighbors drawn per probe
    epsilon    perturbation budget on the 0-255 pixel scale
    """

    sigma: float = 0.5
    n_samples: int = 10
    epsilon: float = 16.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not (0 < self.epsilon <= 255):
            raise ConfigError("epsilon must lie in (0, 255]")


@lru_cache(maxsize=32)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix; rows are basis vectors."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


def dct2(image: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT of the trailing two axes."""
    x = np.asarray(image, dtype=np.float64)
    dh = _dct_matrix(x.shape[-2])
    dw = _dct_matrix(x.shape[-1])
    return dh @ x @ dw.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`dct2` (transpose of an orthonormal map)."""
    y = np.asarray(coeffs, dtype=np.float64)
    dh = _dct_matrix(y.shape[-2])
    dw = _dct_matrix(y.shape[-1])
    return dh.T @ y @ dw


def sample_frequency_neighbors(x_adv: np.ndarray, cfg: SpectralConfig,
                               rng: RngStream) -> np.ndarray:
    """Draw cfg.n_samples frequency-domain neighbors of a batch of images.

    Input is treated as a constant (no autodiff history).  Returns an array
    of shape (n_samples,) + x_adv.shape.  Draws consume the rng in a fixed
    order, so a given (seed, counter) always yields the same neighbor set.
    """
    x = np.asarray(x_adv, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ConfigError("neighbor sampling requires finite inputs")
    pixel_std = cfg.epsilon / 255.0
    out = np.empty((cfg.n_samples,) + x.shape, dtype=np.float64)
    for i in range(cfg.n_samples):
        noisy = x + rng.normal(x.shape, 0.0, pixel_std)
        spectrum = dct2(noisy) * rng.normal(x.shape, 1.0, cfg.sigma)
        out[i] = idct2(spectrum)
    return out
