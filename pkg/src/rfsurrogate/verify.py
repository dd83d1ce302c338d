"""Small-scale invariant suites behind ``rfsurrogate verify``.

Each suite returns a :class:`SuiteResult`; failures name the module, seed and
the counterexample values.  ``inject`` lets tests corrupt one component (the
negative control for the finite-difference suite).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel, iq
from .attack import AttackSpec, PowerRule, craft_batch, craft_power_search, search_iterations
from .experiment import ScenarioConfig, TrialDraws, block_draws, p_max_from_pnr
from .iq import to_real
from .nn.io import dumps, loads
from .nn.model import ArchSpec, LinearSoftmax, Model, TrainConfig, init_model, train_arrays

FD_STEP = 1e-4


@dataclass
class SuiteResult:
    name: str
    module: str
    passed: bool
    seconds: float
    checks: int
    failures: list = field(default_factory=list)


def random_model(rng, hidden=(64,), k=iq.DEFAULT_K) -> Model:
    m = init_model(ArchSpec(hidden_layers=hidden, k=k), rng)
    # small random biases so the zero-bias symmetry does not hide bias paths
    for i, p in enumerate(m.params):
        if p.ndim == 1:
            m.params[i] = 0.1 * rng.standard_normal(p.shape)
    return m


def fd_gradient(model, x, label, h=FD_STEP):
    """Central differences of the loss wrt every input entry of one (2, k) frame."""
    n = x.size
    xp = np.repeat(x[None], n, axis=0).reshape(n, -1)
    xm = xp.copy()
    idx = np.arange(n)
    xp[idx, idx] += h
    xm[idx, idx] -= h
    shape = (n,) + x.shape
    lp = model.loss(xp.reshape(shape), label)
    lm = model.loss(xm.reshape(shape), label)
    return ((lp - lm) / (2 * h)).reshape(x.shape)


def fd_mismatches(g, fd):
    tol = np.maximum(1e-5, 1e-3 * np.abs(g))
    return np.argwhere(np.abs(g - fd) > tol)


def crosses_kink(model: Model, x, entry, h=FD_STEP) -> bool:
    """True if the ReLU pattern differs between x - h e and x + h e."""
    pats = []
    for s in (-h, h):
        xs = x.copy()
        xs[tuple(entry)] += s
        _, (z0, acts, _) = model._run(xs[None])
        pats.append([z0 > 0] + [a > 0 for a in acts[1:]])
    return any(not np.array_equal(a, b) for a, b in zip(*pats))


def gradient_triples(n, seed):
    """(model, x, label) triples: fresh He-init models with N(0, 1) inputs."""
    rng = np.random.default_rng(seed)
    for i in range(n):
        hidden = ((64,), (64, 64), (32, 32, 32))[i % 3]
        model = random_model(rng, hidden)
        x = rng.standard_normal((2, model.k))
        yield model, x, int(rng.integers(2))


def suite_gradient(seed, n=20, inject=None):
    """Analytic input gradients vs central differences.

    Entries whose +/- h stencil straddles a ReLU kink are skipped; the loss is
    not differentiable there and no step size reconciles the two.
    """
    failures, checks = [], 0
    for i, (model, x, label) in enumerate(gradient_triples(n, seed)):
        g = model.input_gradient(x, label)
        if inject == "gradient":
            g = g.copy()
            g[0, 0] *= 1.5
            g[0, 0] += 1e-3
        fd = fd_gradient(model, x, label)
        for e in fd_mismatches(g, fd):
            if not crosses_kink(model, x, e):
                failures.append(f"triple {i} entry {tuple(int(v) for v in e)}: analytic {g[tuple(e)]:.6g} fd {fd[tuple(e)]:.6g}")
        checks += g.size
    return checks, failures


def linear_threshold_surrogate(rng, k, r, h, eps_star):
    """Linear softmax whose flip along the MRPP ray from r sits exactly at eps_star."""
    w = rng.standard_normal((2 * k, 2))
    diff = w[:, 0] - w[:, 1]
    m = LinearSoftmax(w, np.zeros(2), k)
    # the noise-target input gradient is p_signal * diff, so the unit direction ignores b
    g = diff.reshape(2, k)
    v = np.conj(h) * (g[0] + 1j * g[1])
    d = v / np.linalg.norm(v)
    slope = float(diff @ to_real(h * d).reshape(-1))
    d0 = eps_star * slope
    b0 = d0 - float(diff @ to_real(r).reshape(-1))
    m.b = np.array([b0, 0.0])
    return m


def suite_bisection(seed, n=200, p_max=4.0, rel=1e-3, inject=None):
    rng = np.random.default_rng(seed)
    k = iq.DEFAULT_K
    eps_acc = rel * math.sqrt(p_max)
    want_iter = search_iterations(p_max, eps_acc)
    failures = []
    for i in range(n):
        r = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        h = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / math.sqrt(2)
        eps_star = float(rng.uniform(0.01, 0.99) * math.sqrt(p_max))
        m = linear_threshold_surrogate(rng, k, r, h, eps_star)
        spec = AttackSpec(PowerRule.SURROGATE_SEARCH, "r_bt", p_max, eps_acc)
        out = craft_power_search(m, r, h, spec)
        if inject == "bisection":
            out = type(out)(out.delta, out.epsilon_used + 2 * eps_acc, out.attacked, out.iterations)
        if abs(out.epsilon_used - eps_star) > eps_acc or out.iterations != want_iter:
            failures.append(f"case {i}: eps* {eps_star:.6g} got {out.epsilon_used:.6g} iterations {out.iterations} (want {want_iter})")
    return n, failures


def suite_budget(seed, n=200, inject=None):
    rng = np.random.default_rng(seed)
    k = iq.DEFAULT_K
    m = random_model(rng)
    failures, checks = [], 0
    r_bt = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    r_ba = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    h_at = 10 ** rng.uniform(-2, 2, (n, 1)) * (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
    for pnr in (-10.0, 0.0, 15.0):
        p_max = p_max_from_pnr(pnr, 0.1, k)
        for rule in PowerRule:
            for source in ("r_bt", "r_ba"):
                for literal in (False, True):
                    spec = AttackSpec(rule, source, p_max, 1e-3 * math.sqrt(p_max), literal)
                    res = craft_batch(spec, m, r_bt, r_ba, h_at)
                    power = np.sum(np.abs(res.delta) ** 2, axis=1)
                    if inject == "budget":
                        power = power * 1.01
                    bad = np.flatnonzero(power > p_max + 1e-9)
                    checks += n
                    for j in bad[:3]:
                        failures.append(f"{rule.value}/{source} literal={literal} pnr {pnr}: |delta|^2 {power[j]:.9g} > {p_max:.9g}")
    return checks, failures


def suite_signal(seed, n=20000, inject=None):
    rng = np.random.default_rng(seed)
    failures = []
    s = iq.qpsk_symbols((n,), 1.0, rng)
    if not np.allclose(np.abs(s) ** 2, 1.0):
        failures.append("QPSK symbols are not unit energy")
    z = iq.awgn_samples((n,), 0.1, rng)
    var = float(np.mean(np.abs(z) ** 2))
    if abs(var - 0.1) > 6 * 0.1 / math.sqrt(n):
        failures.append(f"AWGN power {var:.6g}, want 0.1")
    x = s[: 16]
    if not np.array_equal(iq.from_real(to_real(x)).samples, x):
        failures.append("to_real/from_real round trip is not exact")
    return 3, failures


def suite_channel(seed, n=20000, inject=None):
    rng = np.random.default_rng(seed)
    p = channel.FadingParams()
    failures = []
    draw = channel.draw_channel(p, n, 1, rng)
    ray = float(np.mean(np.abs(draw.rayleigh) ** 2))
    if abs(ray - 1.0) > 6 / math.sqrt(n):
        failures.append(f"Rayleigh power {ray:.6g}, want 1")
    near = np.abs(channel.channel_gains(p, 0.5, draw))
    far = np.abs(channel.channel_gains(p, 1.5, draw))
    if not np.all(near >= far):
        failures.append("gain is not pathwise non-increasing in distance")
    x = iq.qpsk_frame(16, 1.0, rng)
    h = channel.sample_channel(p, 1.0, 16, rng)
    a = channel.receive(h, x, 0.1, np.random.default_rng(seed))
    b = channel.receive_with_perturbation(h, x, h, iq.IqFrame.zeros(16), 0.1, np.random.default_rng(seed))
    if a != b:
        failures.append("zero perturbation changes the received frame")
    return 3, failures


def suite_training(seed, inject=None):
    rng = np.random.default_rng(seed)
    n = 256
    x = rng.standard_normal((n, 2, 8))
    y = (np.sum(x[:, 0] ** 2, axis=1) > 8).astype(int)
    if len(np.unique(y)) < 2:
        y[0] = 1 - y[0]
    arch = ArchSpec(conv_filters=4, hidden_layers=(8,), k=8)
    cfg = TrainConfig(epochs=2, batch_size=32, seed=seed)
    a = train_arrays(x, y, arch, cfg)
    b = train_arrays(x, y, arch, cfg)
    failures = []
    if not a.same_params(b):
        failures.append("training is not deterministic for a fixed seed")
    blob = dumps(a)
    if dumps(loads(blob)) != blob or not loads(blob).same_params(a):
        failures.append("model serialization does not round-trip bit-exactly")
    return 2, failures


def suite_trials(seed, inject=None):
    cfg = ScenarioConfig(master_seed=seed, train_frames=64, test_trials=10)
    a: TrialDraws = block_draws(cfg, 0, 10)
    b: TrialDraws = block_draws(cfg, 0, 250)
    failures = []
    if not np.array_equal(a.symbols, b.symbols[:10]) or not np.array_equal(a.noise_bt, b.noise_bt[:10]):
        failures.append("truncated block draws differ from the full block")
    return 1, failures


SUITES = (
    ("signal", "signal-core", suite_signal),
    ("channel", "channel", suite_channel),
    ("finite-difference", "neuralnet", suite_gradient),
    ("training", "neuralnet", suite_training),
    ("bisection-oracle", "attack", suite_bisection),
    ("budget", "attack", suite_budget),
    ("trial-streams", "experiment", suite_trials),
)


def run_suites(seed: int = 0, inject=None, only=None):
    out = []
    for name, module, fn in SUITES:
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            checks, failures = fn(seed, inject=inject)
        except Exception as exc:  # reported, not raised: the report lists every suite
            checks, failures = 0, [f"raised {type(exc).__name__}: {exc}"]
        out.append(SuiteResult(name, module, not failures, time.perf_counter() - t0, checks, failures))
    return out


def format_report(results, seed) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status} {r.name:<18} [{r.module}] {r.checks} checks in {r.seconds:.2f}s")
        for f in r.failures[:10]:
            lines.append(f"    {r.module} seed={seed}: {f}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} suites passed")
    return "\n".join(lines)

