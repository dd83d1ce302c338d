"""Diagonal fading channel with path loss and lognormal shadowing.

Per-symbol complex gain for a link of length d::

    h_i = K * (d0 / d)**gamma * psi * h_ray_i

``psi`` is one lognormal shadowing draw per frame and ``h_ray_i`` are i.i.d.
unit-power circularly-symmetric complex Gaussians (Rayleigh magnitude).
With ``coherence="frame"`` a single Rayleigh coefficient covers the frame.

The random parts are drawn distance-free (:class:`ChannelDraw`) and turned into
gains by :func:`channel_gains`.  Reusing one draw at several distances gives
pathwise-coupled channels, which the experiment module relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .iq import IqFrame, awgn_samples

SHADOW_DOMAINS = ("amplitude", "power")
COHERENCE = ("symbol", "frame")


@dataclass(frozen=True)
class FadingParams:
    """Channel law constants.

    ``shadow_domain`` selects how the dB shadowing draw X ~ N(0, sigma^2) maps to
    the gain: ``"amplitude"`` multiplies the gain by 10**(X/10), ``"power"``
    multiplies the received power by 10**(X/10) (gain by 10**(X/20)).
    """

    k_const: float = 1.0
    d0: float = 1.0
    gamma: float = 2.7
    shadow_sigma_db: float = 8.0
    shadow_domain: str = "power"
    # "symbol": independent small-scale fading per symbol; "frame": one
    # Rayleigh coefficient shared by all k symbols of a frame.
    coherence: str = "symbol"

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")
        if self.shadow_domain not in SHADOW_DOMAINS:
            raise ValueError(f"shadow_domain must be one of {SHADOW_DOMAINS}")
        if self.coherence not in COHERENCE:
            raise ValueError(f"coherence must be one of {COHERENCE}")

    def path_gain(self, d: float) -> float:
        """Deterministic amplitude attenuation K (d0/d)^gamma."""
        if d <= 0:
            raise ValueError(f"distance must be positive, got {d}")
        return self.k_const * (self.d0 / d) ** self.gamma

    def shadow_gain(self, x_db):
        """Amplitude factor for a shadowing draw given in dB."""
        x_db = np.asarray(x_db, dtype=np.float64)
        if self.shadow_domain == "amplitude":
            return 10.0 ** (x_db / 10.0)
        return 10.0 ** (x_db / 20.0)


@dataclass(frozen=True)
class Topology:
    d_bt: float = 1.0
    d_ba: float = 0.5
    d_ta: float = 0.5
    label: str = "A1"

    def __post_init__(self):
        for name in ("d_bt", "d_ba", "d_ta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Diagonal of a k x k channel matrix, plus the distance it was drawn for."""

    gains: np.ndarray
    distance: float = 1.0

    def __post_init__(self):
        g = np.array(self.gains, dtype=np.complex128, copy=True).reshape(-1)
        if g.size == 0 or not np.all(np.isfinite(g)):
            raise ValueError("gains must be a non-empty finite vector")
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def k(self) -> int:
        return self.gains.size

    @classmethod
    def identity(cls, k: int) -> ChannelRealization:
        return cls(np.ones(k, dtype=np.complex128))


class ChannelDraw(NamedTuple):
    """Distance-free randomness of a batch of channels.

    shadow_db: (n,) shadowing in dB, already scaled by sigma.
    rayleigh: (n, k) unit-power complex Gaussian coefficients.
    """

    shadow_db: np.ndarray
    rayleigh: np.ndarray


def draw_channel(p: FadingParams, n: int, k: int, rng: np.random.Generator) -> ChannelDraw:
    shadow = p.shadow_sigma_db * rng.standard_normal(n)
    z = rng.standard_normal((2, n, k))
    if p.coherence == "frame":
        z = np.broadcast_to(z[:, :, :1], z.shape)
    return ChannelDraw(shadow, (z[0] + 1j * z[1]) / math.sqrt(2.0))


def channel_gains(p: FadingParams, d: float, draw: ChannelDraw) -> np.ndarray:
    """(n, k) complex gains for distance d."""
    amp = p.path_gain(d) * p.shadow_gain(draw.shadow_db)
    return amp[..., None] * draw.rayleigh


def sample_channel(p: FadingParams, d: float, k: int, rng: np.random.Generator) -> ChannelRealization:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if k < 1:
        raise ValueError("k must be >= 1")
    draw = draw_channel(p, 1, k, rng)
    return ChannelRealization(channel_gains(p, d, draw)[0], distance=d)


def _samples(x):
    return x.samples if isinstance(x, IqFrame) else np.asarray(x)


def apply(h: ChannelRealization, x: IqFrame) -> IqFrame:
    """Elementwise product of a diagonal channel with a frame."""
    if h.k != len(x):
        raise ValueError(f"length mismatch: channel {h.k}, frame {len(x)}")
    return IqFrame(h.gains * x.samples)


def receive(h: ChannelRealization, x: IqFrame, noise_power: float, rng: np.random.Generator) -> IqFrame:
    out = apply(h, x).samples
    return IqFrame(out + awgn_samples(out.size, noise_power, rng))


def receive_with_perturbation(
    h_bx: ChannelRealization,
    x: IqFrame,
    h_ax: ChannelRealization,
    delta: IqFrame,
    noise_power: float,
    rng: np.random.Generator,
) -> IqFrame:
    """H_bx x + H_ax delta + n.  Noise is drawn exactly as in :func:`receive`."""
    wanted = apply(h_bx, x).samples
    pert = apply(h_ax, delta).samples
    return IqFrame(wanted + pert + awgn_samples(wanted.size, noise_power, rng))
