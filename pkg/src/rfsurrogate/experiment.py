"""Scenario orchestration: datasets, per-node training, Monte Carlo attack curves.

Randomness layout (all streams keyed off ``master_seed`` through
``numpy.random.SeedSequence``):

* training data and training loop per node role (transmitter / adversary);
  every adversary location reuses the same stream, so surrogates at different
  distances see pathwise-coupled data,
* Monte Carlo trials in fixed blocks of ``TRIAL_BLOCK``; block ``b`` always
  draws the same distance-free channel/noise/symbol randomness, whatever the
  scenario, PNR point or worker schedule.  Curves therefore share common random
  numbers and ``jobs`` never changes a result.
"""

from __future__ import annotations

import enum
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .attack import (
    AttackSpec,
    InputSource,
    PowerRule,
    craft_batch,
    mrpp_directions,
    surrogate_gate,
)
from .channel import ChannelDraw, FadingParams, Topology, channel_gains, draw_channel
from .iq import DEFAULT_K, IqFrame, Label, LabeledFrame, awgn_samples, from_db, qpsk_symbols, to_real
from .nn.model import ArchSpec, Classifier, Model, TrainConfig, train_arrays

TAG_DATA = 101
TAG_TRAIN = 102
TAG_TRIAL = 103
ROLE_TRANSMITTER = 0
ROLE_ADVERSARY = 1

TRIAL_BLOCK = 250

FIG_DISTANCES = (0.5, 1.0, math.sqrt(1.25), 1.5)
PNR_REFERENCES = ("transmit", "receive")


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0] >> 1)


def noise_power_for_snr(snr_db: float, fading: FadingParams, symbol_energy: float = 1.0, d: float = 1.0) -> float:
    """Noise variance giving ``snr_db`` mean received SNR at distance d, shadowing excluded."""
    return symbol_energy * fading.path_gain(d) ** 2 / from_db(snr_db)


@dataclass(frozen=True)
class AttackTemplate:
    """Attack mode without a budget; the budget comes from each PNR point.

    The search tolerance scales with the budget: eps_acc = eps_acc_rel * sqrt(P_max).
    """

    power_rule: PowerRule = PowerRule.MAX_BUDGET
    input_source: InputSource = InputSource.TRANSMITTER
    eps_acc_rel: float = 1e-3
    alg1_literal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "power_rule", PowerRule(self.power_rule))
        object.__setattr__(self, "input_source", InputSource(self.input_source))
        if not 0 < self.eps_acc_rel < 1:
            raise ValueError("eps_acc_rel must lie in (0, 1)")

    def at(self, p_max: float) -> AttackSpec:
        return AttackSpec(self.power_rule, self.input_source, p_max, self.eps_acc_rel * math.sqrt(p_max), self.alg1_literal)


@dataclass(frozen=True)
class ScenarioConfig:
    topology: Topology = Topology()
    fading: FadingParams = FadingParams()
    noise_power: float = 0.1
    symbol_energy: float = 1.0
    k: int = DEFAULT_K
    train_frames: int = 10_000
    test_trials: int = 2_000
    arch_t: ArchSpec = ArchSpec()
    arch_a: ArchSpec = ArchSpec()
    train_cfg: TrainConfig = TrainConfig()
    attack: AttackTemplate = AttackTemplate()
    pnr_grid_db: tuple = tuple(float(p) for p in range(-10, 16))
    master_seed: int = 0
    # "transmit": PNR compares ||delta||^2 with the receiver noise.  "receive":
    # PNR refers to the mean perturbation power arriving at the transmitter,
    # so the budget is divided by the mean path power gain over d_ta.
    pnr_reference: str = "transmit"

    def __post_init__(self):
        object.__setattr__(self, "pnr_grid_db", tuple(float(p) for p in self.pnr_grid_db))
        if not self.pnr_grid_db:
            raise ValueError("pnr_grid_db must not be empty")
        if list(self.pnr_grid_db) != sorted(self.pnr_grid_db):
            raise ValueError("pnr_grid_db must be sorted")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.train_frames < 2 or self.train_frames % 2:
            raise ValueError("train_frames must be a positive even count")
        if self.test_trials < 1:
            raise ValueError("test_trials must be positive")
        if self.arch_t.k != self.k or self.arch_a.k != self.k:
            raise ValueError("architecture k does not match scenario k")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if self.pnr_reference not in PNR_REFERENCES:
            raise ValueError(f"pnr_reference must be one of {PNR_REFERENCES}")

    def budget(self, pnr_db: float, d_ta: float) -> float:
        p_max = p_max_from_pnr(pnr_db, self.noise_power, self.k)
        if self.pnr_reference == "receive":
            p_max /= self.fading.path_gain(d_ta) ** 2
        return p_max


@dataclass(frozen=True)
class CurvePoint:
    pnr_db: float
    success_rate: float
    n_trials: int
    stderr: float

    @classmethod
    def from_counts(cls, pnr_db: float, fooled: int, n: int) -> CurvePoint:
        p = fooled / n
        return cls(float(pnr_db), p, n, math.sqrt(p * (1.0 - p) / n))


@dataclass
class ResultTable:
    label: str
    points: list
    metadata: dict = field(default_factory=dict)

    @property
    def pnr_db(self):
        return np.array([p.pnr_db for p in self.points])

    @property
    def success(self):
        return np.array([p.success_rate for p in self.points])

    @property
    def stderr(self):
        return np.array([p.stderr for p in self.points])


def p_max_from_pnr(pnr_db: float, noise_power: float, k: int = DEFAULT_K) -> float:
    """Perturbation budget ||delta||^2 for a transmit-side PNR over total receiver noise k * sigma^2."""
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    return from_db(pnr_db) * k * noise_power


# datasets and training --------------------------------------------------------


def build_dataset_arrays(d, n, noise_power, fading, rng, k=DEFAULT_K, symbol_energy=1.0):
    """Balanced shuffled (x, y): x is ``(n, 2, k)`` real, y holds :class:`Label` values."""
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even count")
    half = n // 2
    draw = draw_channel(fading, half, k, rng)
    sym = qpsk_symbols((half, k), symbol_energy, rng)
    signal = channel_gains(fading, d, draw) * sym + awgn_samples((half, k), noise_power, rng)
    noise = awgn_samples((half, k), noise_power, rng)
    x = to_real(np.concatenate([signal, noise]))
    y = np.concatenate([np.full(half, int(Label.SIGNAL)), np.full(half, int(Label.NOISE))])
    perm = rng.permutation(n)
    return x[perm], y[perm]


def build_dataset(d, n, noise_power, fading, rng, k=DEFAULT_K, symbol_energy=1.0):
    x, y = build_dataset_arrays(d, n, noise_power, fading, rng, k, symbol_energy)
    return [LabeledFrame(IqFrame(xi[0] + 1j * xi[1]), Label(int(yi))) for xi, yi in zip(x, y)]


def train_node(cfg: ScenarioConfig, role: int, d: float, arch: ArchSpec) -> Model:
    rng = np.random.default_rng(derive_seed(cfg.master_seed, TAG_DATA, role))
    x, y = build_dataset_arrays(d, cfg.train_frames, cfg.noise_power, cfg.fading, rng, cfg.k, cfg.symbol_energy)
    tc = replace(cfg.train_cfg, seed=derive_seed(cfg.master_seed, TAG_TRAIN, role))
    model = train_arrays(x, y, arch, tc)
    model.train_meta["distance"] = float(d)
    return model


class ModelStore:
    """Trains each (role, distance, architecture) model once per configuration."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self._cache = {}

    def _get(self, role, d, arch):
        key = (role, float(d), arch)
        if key not in self._cache:
            self._cache[key] = train_node(self.cfg, role, d, arch)
        return self._cache[key]

    def target(self) -> Model:
        return self._get(ROLE_TRANSMITTER, self.cfg.topology.d_bt, self.cfg.arch_t)

    def surrogate(self, d_ba: float, arch: ArchSpec = None) -> Model:
        return self._get(ROLE_ADVERSARY, d_ba, arch or self.cfg.arch_a)


def train_pair(cfg: ScenarioConfig):
    store = ModelStore(cfg)
    return store.target(), store.surrogate(cfg.topology.d_ba)


# Monte Carlo ----------------------------------------------------------------


class TrialDraws(NamedTuple):
    symbols: np.ndarray
    bt: ChannelDraw
    ba: ChannelDraw
    at: ChannelDraw
    noise_bt: np.ndarray
    noise_ba: np.ndarray


class TrialOutcome(NamedTuple):
    attacked: bool
    fooled: bool
    target_pre_label: Label
    surrogate_label: Label


def draw_trials(cfg: ScenarioConfig, n: int, rng: np.random.Generator) -> TrialDraws:
    k = cfg.k
    return TrialDraws(
        qpsk_symbols((n, k), cfg.symbol_energy, rng),
        draw_channel(cfg.fading, n, k, rng),
        draw_channel(cfg.fading, n, k, rng),
        draw_channel(cfg.fading, n, k, rng),
        awgn_samples((n, k), cfg.noise_power, rng),
        awgn_samples((n, k), cfg.noise_power, rng),
    )


def block_draws(cfg: ScenarioConfig, block: int, count: int) -> TrialDraws:
    """The first ``count`` trials of block ``block``; always drawn as a full block."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, TAG_TRIAL, block]))
    full = draw_trials(cfg, TRIAL_BLOCK, rng)
    return TrialDraws(
        full.symbols[:count],
        ChannelDraw(full.bt.shadow_db[:count], full.bt.rayleigh[:count]),
        ChannelDraw(full.ba.shadow_db[:count], full.ba.rayleigh[:count]),
        ChannelDraw(full.at.shadow_db[:count], full.at.rayleigh[:count]),
        full.noise_bt[:count],
        full.noise_ba[:count],
    )


@dataclass(frozen=True)
class CurveJob:
    """Everything one attack curve needs; pickled to worker processes."""

    cfg: ScenarioConfig
    topology: Topology
    target: Classifier
    surrogate: Classifier
    attack: AttackTemplate = None  # None: no-attack control

    def evaluate(self, draws: TrialDraws, pnr_grid):
        """Counts per PNR point for one batch of trials."""
        cfg, topo = self.cfg, self.topology
        f = cfg.fading
        h_bt = channel_gains(f, topo.d_bt, draws.bt)
        h_ba = channel_gains(f, topo.d_ba, draws.ba)
        h_at = channel_gains(f, topo.d_ta, draws.at)
        r_bt = h_bt * draws.symbols + draws.noise_bt
        r_ba = h_ba * draws.symbols + draws.noise_ba

        n, m = len(r_bt), len(pnr_grid)
        fooled = np.zeros(m, dtype=np.int64)
        attacked = np.zeros(m, dtype=np.int64)
        excess = np.full(m, -np.inf)
        if self.attack is None:
            miss = int(np.sum(~self.target.is_signal(to_real(r_bt))))
            return fooled + miss, attacked, np.zeros(m)

        literal = self.attack.alg1_literal
        gate = surrogate_gate(self.surrogate, r_ba, literal)
        r_ref = r_bt if self.attack.input_source is InputSource.TRANSMITTER else r_ba
        dirs = mrpp_directions(self.surrogate, r_ref, h_at)
        for i, pnr in enumerate(pnr_grid):
            p_max = cfg.budget(pnr, topo.d_ta)
            res = craft_batch(self.attack.at(p_max), self.surrogate, r_bt, r_ba, h_at, gate, dirs)
            r_adv = r_bt + h_at * res.delta
            fooled[i] = np.sum(~self.target.is_signal(to_real(r_adv)))
            attacked[i] = np.sum(res.attacked)
            power = np.sum(res.delta.real**2 + res.delta.imag**2, axis=1)
            excess[i] = np.max(power - p_max) if n else -np.inf
        return fooled, attacked, excess


def _eval_block(args):
    job, block, count, grid = args
    return job.evaluate(block_draws(job.cfg, block, count), grid)


def _blocks(n_trials):
    return [(b, min(TRIAL_BLOCK, n_trials - b * TRIAL_BLOCK)) for b in range(math.ceil(n_trials / TRIAL_BLOCK))]


def _run_jobs(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [_eval_block(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
        return list(ex.map(_eval_block, tasks))


def run_curve(job: CurveJob, label: str, jobs: int = 1, metadata=None) -> ResultTable:
    cfg = job.cfg
    if cfg.test_trials < 1:
        raise ValueError("test_trials must be positive")
    grid = cfg.pnr_grid_db
    tasks = [(job, b, c, grid) for b, c in _blocks(cfg.test_trials)]
    parts = _run_jobs(tasks, jobs)
    fooled = sum(p[0] for p in parts)
    attacked = sum(p[1] for p in parts)
    excess = np.max([p[2] for p in parts], axis=0)
    points = [CurvePoint.from_counts(pnr, int(c), cfg.test_trials) for pnr, c in zip(grid, fooled)]
    meta = {
        "master_seed": cfg.master_seed,
        "d_bt": job.topology.d_bt,
        "d_ba": job.topology.d_ba,
        "d_ta": job.topology.d_ta,
        "attack": None if job.attack is None else f"{job.attack.power_rule.value}/{job.attack.input_source.value}",
        "attacked_fraction": [int(a) / cfg.test_trials for a in attacked],
        "max_budget_excess": float(np.max(excess)),
        "target_val_accuracy": getattr(job.target, "train_meta", {}).get("val_accuracy"),
        "surrogate_val_accuracy": getattr(job.surrogate, "train_meta", {}).get("val_accuracy"),
    }
    meta.update(metadata or {})
    return ResultTable(label, points, meta)


def attack_success_curve(cfg: ScenarioConfig, models=None, jobs: int = 1, label: str = None) -> ResultTable:
    """Success rate vs PNR for the configured topology and attack."""
    model_t, model_a = models if models is not None else train_pair(cfg)
    job = CurveJob(cfg, cfg.topology, model_t, model_a, cfg.attack)
    return run_curve(job, label or cfg.topology.label, jobs)


def no_attack_curve(cfg: ScenarioConfig, model_t, jobs: int = 1) -> ResultTable:
    """Control: delta = 0 everywhere; success equals the target's miss rate on signal frames."""
    job = CurveJob(cfg, cfg.topology, model_t, model_t, None)
    return run_curve(job, "no-attack", jobs)


def run_trial(model_t, model_a, cfg: ScenarioConfig, pnr_db: float, rng: np.random.Generator, attack=...) -> TrialOutcome:
    """One trial with fresh channels, symbols and noise drawn from ``rng``."""
    draws = draw_trials(cfg, 1, rng)
    template = cfg.attack if attack is ... else attack
    job = CurveJob(cfg, cfg.topology, model_t, model_a, template)
    fooled, attacked, _ = job.evaluate(draws, (pnr_db,))
    f = cfg.fading
    r_bt = channel_gains(f, cfg.topology.d_bt, draws.bt) * draws.symbols + draws.noise_bt
    r_ba = channel_gains(f, cfg.topology.d_ba, draws.ba) * draws.symbols + draws.noise_ba
    t_sig = bool(model_t.is_signal(to_real(r_bt))[0])
    a_sig = bool(model_a.is_signal(to_real(r_ba))[0])
    return TrialOutcome(
        bool(attacked[0]),
        bool(fooled[0]),
        Label.SIGNAL if t_sig else Label.NOISE,
        Label.SIGNAL if a_sig else Label.NOISE,
    )


# figure reproduction --------------------------------------------------------


class ScenarioError(RuntimeError):
    """A curve failed; the message names the figure and scenario."""


class Figure(enum.Enum):
    FIX_DBA = "fix-dba"
    FIX_DTA = "fix-dta"
    METHODS = "methods"
    ARCH = "arch"


UPPER_BOUND = "upper-bound"
METHOD_TEMPLATES = (
    ("max-power", PowerRule.MAX_BUDGET, InputSource.TRANSMITTER),
    ("surrogate-search", PowerRule.SURROGATE_SEARCH, InputSource.TRANSMITTER),
    ("r_ba", PowerRule.MAX_BUDGET, InputSource.ADVERSARY),
)
ARCH_HIDDEN = ((64,), (64, 64), (64, 64, 64))


def reproduce(figure, base: ScenarioConfig, jobs: int = 1, store: ModelStore = None):
    figure = Figure(figure)
    store = store or ModelStore(base)
    target = store.target()
    d_bt = base.topology.d_bt
    tables = []

    def curve(label, topo, surrogate, attack, extra=None):
        cfg = replace(base, topology=topo)
        try:
            tables.append(run_curve(CurveJob(cfg, topo, target, surrogate, attack), label, jobs, extra))
        except Exception as exc:
            raise ScenarioError(f"{figure.value}/{label}: {type(exc).__name__}: {exc}") from exc

    if figure is Figure.FIX_DBA:
        surrogate = store.surrogate(0.5)
        for i, d_ta in enumerate(FIG_DISTANCES):
            curve(f"A{i + 1}", Topology(d_bt, 0.5, d_ta, f"A{i + 1}"), surrogate, base.attack)
        white_box = replace(base.attack, power_rule=PowerRule.SURROGATE_SEARCH, input_source=InputSource.TRANSMITTER)
        curve(UPPER_BOUND, Topology(d_bt, 0.5, FIG_DISTANCES[0], "A1"), target, white_box, {"white_box": True})
    elif figure is Figure.FIX_DTA:
        for label, d_ba in zip(("A1", "A5", "A6", "A7"), FIG_DISTANCES):
            curve(label, Topology(d_bt, d_ba, 0.5, label), store.surrogate(d_ba), base.attack)
    elif figure is Figure.METHODS:
        surrogate = store.surrogate(base.topology.d_ba)
        for label, rule, source in METHOD_TEMPLATES:
            attack = replace(base.attack, power_rule=rule, input_source=source)
            curve(label, base.topology, surrogate, attack)
    else:
        for hidden in ARCH_HIDDEN:
            arch = replace(base.arch_a, hidden_layers=hidden)
            label = f"hidden-{len(hidden)}"
            curve(label, base.topology, store.surrogate(base.topology.d_ba, arch), base.attack, {"hidden_layers": list(hidden)})
    return tables


def _peak_index(t: ResultTable) -> int:
    if not t.points:
        raise ValueError("empty result table")
    return int(np.argmax(t.success))


def peak_pnr(t: ResultTable) -> float:
    return t.points[_peak_index(t)].pnr_db


def peak_success(t: ResultTable) -> float:
    return t.points[_peak_index(t)].success_rate
