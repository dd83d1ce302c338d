"""Targeted signal->noise perturbations crafted on the adversary's surrogate.

The direction is the conjugate-channel-weighted gradient of the surrogate's
loss toward ``noise`` (maximum received perturbation power, MRPP).  Two rules
set the amplitude: spend the whole budget, or bisect for the smallest
amplitude that flips the surrogate on the predicted received frame.

The batched ``*_batch`` functions operate on ``(n, k)`` complex arrays and are
what the Monte Carlo runner calls; the per-frame functions wrap them.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ChannelRealization
from .iq import IqFrame, Label, to_real
from .nn.model import Classifier, complex_gradient

log = logging.getLogger(__name__)

BUDGET_SLACK = 1e-9


class PowerRule(enum.Enum):
    MAX_BUDGET = "max-budget"
    SURROGATE_SEARCH = "surrogate-search"


class InputSource(enum.Enum):
    TRANSMITTER = "r_bt"
    ADVERSARY = "r_ba"


class DegenerateDirection(ValueError):
    """Zero gradient or zero channel: there is no direction to push along."""


@dataclass(frozen=True)
class AttackSpec:
    power_rule: PowerRule = PowerRule.MAX_BUDGET
    input_source: InputSource = InputSource.TRANSMITTER
    p_max: float = 1.0
    eps_acc: float = 1e-3
    # Literal variant: gate on a 'noise' surrogate label
    # and move eps_min up on a successful flip.
    alg1_literal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "power_rule", PowerRule(self.power_rule))
        object.__setattr__(self, "input_source", InputSource(self.input_source))
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if not 0 < self.eps_acc < math.sqrt(self.p_max):
            raise ValueError("eps_acc must lie in (0, sqrt(p_max))")


@dataclass(frozen=True)
class Perturbation:
    delta: IqFrame
    epsilon_used: float
    attacked: bool
    iterations: int = 0


class CraftResult(NamedTuple):
    delta: np.ndarray  # (n, k) complex
    epsilon: np.ndarray  # (n,)
    attacked: np.ndarray  # (n,) bool
    iterations: int


def search_iterations(p_max: float, eps_acc: float) -> int:
    """Bisection steps needed to shrink [0, sqrt(p_max)] to width <= eps_acc."""
    return max(0, math.ceil(math.log2(math.sqrt(p_max) / eps_acc)))


def mrpp_directions(surrogate: Classifier, r_ref: np.ndarray, h_at: np.ndarray):
    """Unit-norm conj(h_at) * grad directions for a batch.

    Returns ``(directions, ok)``; rows with a zero or non-finite weighted
    gradient get a zero direction and ``ok = False``.
    """
    r_ref = np.atleast_2d(r_ref)
    g = complex_gradient(surrogate.input_gradient(to_real(r_ref), int(Label.NOISE)))
    v = np.conj(h_at) * g
    norm = np.sqrt(np.sum(v.real**2 + v.imag**2, axis=-1))
    ok = np.isfinite(norm) & (norm > 0)
    safe = np.where(ok, norm, 1.0)
    return np.where(ok[:, None], v / safe[:, None], 0.0), ok


def search_batch(
    surrogate: Classifier,
    r_ref: np.ndarray,
    h_at: np.ndarray,
    directions: np.ndarray,
    p_max: float,
    eps_acc: float,
    literal: bool = False,
    probes=None,
):
    """Per-row bisection over eps in [0, sqrt(p_max)].

    A probe succeeds when the surrogate labels ``r_ref + h_at * (-eps * dir)``
    as noise (the same expression the receiver side evaluates).  Default update keeps the smallest successful amplitude
    (success -> eps_max = eps_avg); ``literal`` swaps the two branches.
    Returns ``(eps_max, eps_min, iterations)``.  If ``probes`` is a list, the
    ``(eps_avg, flipped)`` arrays of each step are appended to it.
    """
    n = len(r_ref)
    eps_min = np.zeros(n)
    eps_max = np.full(n, math.sqrt(p_max))
    width = math.sqrt(p_max)
    iterations = 0
    while width > eps_acc:
        eps_avg = 0.5 * (eps_max + eps_min)
        x_adv = r_ref + h_at * (-eps_avg[:, None] * directions)
        flipped = ~surrogate.is_signal(to_real(x_adv))
        if probes is not None:
            probes.append((eps_avg, flipped))
        if literal:
            eps_min = np.where(flipped, eps_avg, eps_min)
            eps_max = np.where(flipped, eps_max, eps_avg)
        else:
            eps_max = np.where(flipped, eps_avg, eps_max)
            eps_min = np.where(flipped, eps_min, eps_avg)
        width *= 0.5
        iterations += 1
    return eps_max, eps_min, iterations


def craft_batch(
    spec: AttackSpec,
    surrogate: Classifier,
    r_bt: np.ndarray,
    r_ba: np.ndarray,
    h_at: np.ndarray,
    gate=None,
    directions=None,
) -> CraftResult:
    """Full attack for a batch of trials.

    ``gate`` (surrogate says signal on r_ba) and ``directions`` may be passed
    in precomputed; both are independent of the power budget.
    """
    r_ref = r_bt if spec.input_source is InputSource.TRANSMITTER else r_ba
    if gate is None:
        gate = surrogate_gate(surrogate, r_ba, spec.alg1_literal)
    if directions is None:
        dirs, ok = mrpp_directions(surrogate, r_ref, h_at)
    else:
        dirs, ok = directions
    attacked = gate & ok
    if spec.power_rule is PowerRule.MAX_BUDGET:
        eps = np.full(len(r_ref), math.sqrt(spec.p_max))
        iterations = 0
    else:
        eps, _, iterations = search_batch(surrogate, r_ref, h_at, dirs, spec.p_max, spec.eps_acc, spec.alg1_literal)
    eps = np.where(attacked, eps, 0.0)
    delta = -eps[:, None] * dirs
    return CraftResult(delta, eps, attacked, iterations)


def surrogate_gate(surrogate: Classifier, r_ba: np.ndarray, literal: bool = False) -> np.ndarray:
    """Attack iff the surrogate sees a signal on r_ba (a noise label when ``literal``)."""
    says_signal = surrogate.is_signal(to_real(np.atleast_2d(r_ba)))
    return ~says_signal if literal else says_signal


# per-frame API ----------------------------------------------------------------


def _row(x):
    if isinstance(x, IqFrame):
        return x.samples[None]
    if isinstance(x, ChannelRealization):
        return x.gains[None]
    return np.atleast_2d(np.asarray(x, dtype=np.complex128))


def mrpp_direction(surrogate: Classifier, r_ref, h_at) -> IqFrame:
    dirs, ok = mrpp_directions(surrogate, _row(r_ref), _row(h_at))
    if not ok[0]:
        raise DegenerateDirection("surrogate gradient or channel is zero")
    return IqFrame(dirs[0])


def _no_attack(k):
    return Perturbation(IqFrame.zeros(k), 0.0, False)


def craft_max_power(surrogate: Classifier, r_ref, h_at, p_max: float) -> Perturbation:
    if p_max < 0:
        raise ValueError("p_max must be >= 0")
    k = _row(r_ref).shape[1]
    if p_max == 0:
        return _no_attack(k)
    try:
        d = mrpp_direction(surrogate, r_ref, h_at)
    except DegenerateDirection:
        return _no_attack(k)
    eps = math.sqrt(p_max)
    return Perturbation(d.scale(-eps), eps, True)


def craft_power_search(surrogate: Classifier, r_ref, h_at, spec: AttackSpec) -> Perturbation:
    k = _row(r_ref).shape[1]
    r = _row(r_ref)
    h = _row(h_at)
    try:
        d = mrpp_direction(surrogate, r, h)
    except DegenerateDirection:
        return _no_attack(k)
    probes = []
    eps_max, eps_min, iterations = search_batch(
        surrogate, r, h, d.samples[None], spec.p_max, spec.eps_acc, spec.alg1_literal, probes
    )
    if not spec.alg1_literal:
        bracket_violations([(float(e[0]), bool(f[0])) for e, f in probes], float(eps_min[0]), float(eps_max[0]))
    eps = float(eps_max[0])
    return Perturbation(d.scale(-eps), eps, True, iterations)


def craft(spec: AttackSpec, surrogate: Classifier, r_bt, r_ba, h_at) -> Perturbation:
    k = _row(r_bt).shape[1]
    if not bool(surrogate_gate(surrogate, _row(r_ba), spec.alg1_literal)[0]):
        return _no_attack(k)
    r_ref = r_bt if spec.input_source is InputSource.TRANSMITTER else r_ba
    if spec.power_rule is PowerRule.MAX_BUDGET:
        return craft_max_power(surrogate, r_ref, h_at, spec.p_max)
    return craft_power_search(surrogate, r_ref, h_at, spec)


def bracket_violations(probes, eps_min: float, eps_max: float) -> int:
    """Probes inconsistent with the final bracket.

    ``probes`` is a sequence of ``(eps, flipped)``.  A successful flip below
    ``eps_min`` or a failure above ``eps_max`` means the surrogate's flip
    region is not monotone in eps along this direction.
    """
    bad = sum(1 for e, flipped in probes if (flipped and e < eps_min) or (not flipped and e > eps_max))
    if bad:
        log.debug("bisection bracket violated at %d of %d probes", bad, len(probes))
    return bad
