"""Flat-fading channels, complex AWGN and reproducible random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


class RngStream:
    """Counter-based random substream keyed by ``(master_seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints (e.g. ``(snr_index, trial)``).
    Identical keys replay identical draws; different keys give independent
    Philox streams, so trials can run in any order or in parallel.
    """

    def __init__(self, master_seed: int, stream_id=0):
        self.master_seed = int(master_seed) & (2**64 - 1)
        key = stream_id if isinstance(stream_id, tuple) else (stream_id,)
        self.stream_id = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, *key) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id + tuple(key))

    def __repr__(self):
        return f"RngStream({self.master_seed}, {self.stream_id})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot draw random numbers from {type(rng).__name__}")


@dataclass(frozen=True)
class ScalarChannel:
    h: complex = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")


@dataclass(frozen=True)
class MimoChannel:
    matrix: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if not np.all(np.isfinite(m)):
            raise ValueError("channel matrix has non-finite entries")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape


def snr_db_to_sigma2(snr_db: float, signal_power: float = 1.0) -> float:
    if not signal_power > 0:
        raise ValueError("signal power must be positive")
    return signal_power * 10.0 ** (-snr_db / 10.0)


def complex_awgn(shape, sigma2: float, rng) -> np.ndarray:
    """Circularly symmetric CN(0, sigma2) samples; each real part has variance sigma2/2."""
    gen = as_generator(rng)
    scale = np.sqrt(sigma2 / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def apply_scalar(x, ch: ScalarChannel, rng) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    y = ch.h * x
    if ch.noise_variance > 0:
        y = y + complex_awgn(x.shape, ch.noise_variance, rng)
    return y


def apply_mimo(x, ch: MimoChannel, rng) -> np.ndarray:
    """``z = H x + noise``; ``x`` is one vector or a ``(cols, uses)`` block."""
    x = np.asarray(x, dtype=complex)
    rows, cols = ch.shape
    if x.shape[0] != cols:
        raise ShapeError(f"input has {x.shape[0]} streams, channel expects {cols}")
    z = ch.matrix @ x
    if ch.noise_variance > 0:
        z = z + complex_awgn(z.shape, ch.noise_variance, rng)
    return z


def draw_rayleigh(rows: int, cols: int, rng) -> np.ndarray:
    """i.i.d. CN(0, 1) matrix."""
    return complex_awgn((rows, cols), 1.0, rng)


def random_phase(x, rng, enabled: bool = True) -> np.ndarray:
    """Rotate a whole block by one uniform random phase (no-op when disabled)."""
    x = np.asarray(x, dtype=complex)
    if not enabled:
        return x
    theta = as_generator(rng).uniform(0.0, 2 * np.pi)
    return x * np.exp(1j * theta)
