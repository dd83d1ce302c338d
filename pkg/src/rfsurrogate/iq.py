"""Complex-baseband primitives: QPSK frames, AWGN, power and dB helpers.

Frames are carried around as immutable :class:`IqFrame` values.  The batched
helpers (``qpsk_symbols``, ``awgn_samples``) work on plain ``(n, k)`` complex
arrays and are what the Monte Carlo loops use.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_K = 16


class Label(enum.IntEnum):
    """Binary sensing outcome.  The integer value is the classifier output index."""

    SIGNAL = 0
    NOISE = 1


@dataclass(frozen=True, eq=False)
class IqFrame:
    """k complex baseband samples; the unit a classifier sees."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128, copy=True).reshape(-1)
        if s.size == 0:
            raise ValueError("frame must hold at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("frame samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def k(self) -> int:
        return self.samples.size

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, IqFrame):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    def __add__(self, other: IqFrame) -> IqFrame:
        if len(other) != len(self):
            raise ValueError("frame length mismatch")
        return IqFrame(self.samples + other.samples)

    def scale(self, c: complex) -> IqFrame:
        return IqFrame(self.samples * c)

    @classmethod
    def zeros(cls, k: int = DEFAULT_K) -> IqFrame:
        return cls(np.zeros(k, dtype=np.complex128))


@dataclass(frozen=True)
class LabeledFrame:
    frame: IqFrame
    label: Label


def _check_k(k: int) -> int:
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return k


def qpsk_symbols(shape, symbol_energy: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the 4-point QPSK constellation with |s|^2 = symbol_energy."""
    if symbol_energy <= 0:
        raise ValueError("symbol_energy must be positive")
    bits = rng.integers(0, 2, size=(2,) + tuple(np.atleast_1d(shape)))
    amp = np.sqrt(symbol_energy / 2.0)
    return amp * ((1.0 - 2.0 * bits[0]) + 1j * (1.0 - 2.0 * bits[1]))


def awgn_samples(shape, noise_power: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise; I and Q each get noise_power / 2."""
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    shape = tuple(np.atleast_1d(shape))
    z = rng.standard_normal((2,) + shape)
    return np.sqrt(noise_power / 2.0) * (z[0] + 1j * z[1])


def qpsk_frame(k: int = DEFAULT_K, symbol_energy: float = 1.0, rng: np.random.Generator = None) -> IqFrame:
    k = _check_k(k)
    rng = rng if rng is not None else np.random.default_rng()
    return IqFrame(qpsk_symbols(k, symbol_energy, rng))


def awgn(k: int, noise_power: float, rng: np.random.Generator = None) -> IqFrame:
    k = _check_k(k)
    rng = rng if rng is not None else np.random.default_rng()
    return IqFrame(awgn_samples(k, noise_power, rng))


def frame_power(f) -> float:
    """Squared l2 norm, sum_i |f_i|^2."""
    s = f.samples if isinstance(f, IqFrame) else np.asarray(f)
    return float(np.sum(s.real**2 + s.imag**2))


def db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"db() needs a positive argument, got {x}")
    return 10.0 * np.log10(x)


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def to_real(f) -> np.ndarray:
    """IqFrame (or complex array ``(..., k)``) -> real array ``(..., 2, k)``; row 0 is I, row 1 is Q."""
    s = f.samples if isinstance(f, IqFrame) else np.asarray(f)
    return np.stack([s.real, s.imag], axis=-2)


def from_real(m) -> IqFrame:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != 2:
        raise ValueError(f"expected a 2 x k matrix, got shape {m.shape}")
    return IqFrame(m[0] + 1j * m[1])


def complex_from_real(m: np.ndarray) -> np.ndarray:
    """Batched inverse of :func:`to_real`: ``(..., 2, k)`` -> ``(..., k)`` complex."""
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-2] != 2:
        raise ValueError(f"expected shape (..., 2, k), got {m.shape}")
    return m[..., 0, :] + 1j * m[..., 1, :]
