"""Tiny I/Q CNN with hand-derived gradients.

Layer stack: width-wise convolution over the 2 x k input (one input channel,
``conv_filters`` kernels of shape 1 x ``conv_kernel``, valid padding) -> ReLU ->
flatten -> dense hidden layers (ReLU, inverted dropout in training) -> dense
2-logit output -> softmax.  Output index 0 is ``signal``, index 1 is ``noise``.

Everything is batched: real inputs are ``(n, 2, k)`` arrays, a single ``(2, k)``
input is promoted to a batch of one and squeezed on the way out.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..iq import DEFAULT_K, IqFrame, Label, to_real
from . import kernels


@dataclass(frozen=True)
class ArchSpec:
    conv_filters: int = 16
    conv_kernel: int = 3
    hidden_layers: tuple = (64,)
    dropout_rate: float = 0.1
    k: int = DEFAULT_K

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.conv_filters < 1:
            raise ValueError("conv_filters must be >= 1")
        if not 1 <= self.conv_kernel <= self.k:
            raise ValueError("conv_kernel must be between 1 and k")
        if not self.hidden_layers or min(self.hidden_layers) < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def conv_width(self) -> int:
        return self.k - self.conv_kernel + 1

    @property
    def flat_size(self) -> int:
        return self.conv_filters * 2 * self.conv_width

    def param_shapes(self):
        shapes = [("conv.w", (self.conv_filters, self.conv_kernel)), ("conv.b", (self.conv_filters,))]
        fan_in = self.flat_size
        for i, width in enumerate(self.hidden_layers):
            shapes += [(f"dense{i}.w", (fan_in, width)), (f"dense{i}.b", (width,))]
            fan_in = width
        shapes += [("out.w", (fan_in, 2)), ("out.b", (2,))]
        return shapes

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.param_shapes())

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("learning_rate and adam_eps must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != 2:
        raise ValueError(f"expected input of shape (2, k) or (n, 2, k), got {x.shape}")
    return x, single


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def _onehot(labels, n):
    y = np.zeros((n, 2))
    y[np.arange(n), np.broadcast_to(np.asarray(labels, dtype=int), (n,))] = 1.0
    return y


class Classifier:
    """Shared API of the CNN and the linear reference model.

    Subclasses provide ``logits(x)`` and ``logit_backward(x, dlogits)`` on
    ``(n, 2, k)`` batches; everything attack-side goes through these.
    """

    k: int

    def logits(self, x):
        raise NotImplementedError

    def logit_backward(self, x, dlogits):
        raise NotImplementedError

    def _check(self, x):
        x, single = _as_batch(x)
        if x.shape[2] != self.k:
            raise ValueError(f"input width {x.shape[2]} does not match model k={self.k}")
        return x, single

    def proba(self, x):
        """Eval-mode class probabilities, ``(..., 2)``."""
        x, single = self._check(x)
        p = softmax(self.logits(x))
        return p[0] if single else p

    def is_signal(self, x):
        """Boolean argmax; an exact tie goes to noise."""
        p = self.proba(x)
        return p[..., Label.SIGNAL] > p[..., Label.NOISE]

    def loss(self, x, label):
        x, single = self._check(x)
        out = -log_softmax(self.logits(x))[np.arange(len(x)), np.broadcast_to(np.asarray(label, dtype=int), (len(x),))]
        return out[0] if single else out

    def input_gradient(self, x, target):
        """d loss(x, target) / dx, eval mode, same shape as x."""
        x, single = self._check(x)
        p = softmax(self.logits(x))
        g = self.logit_backward(x, p - _onehot(target, len(x)))
        return g[0] if single else g


class Model(Classifier):
    """A CNN with parameters.  Treat instances as immutable once trained."""

    def __init__(self, arch: ArchSpec, params, train_meta=None):
        self.arch = arch
        shapes = arch.param_shapes()
        if len(params) != len(shapes):
            raise ValueError("parameter list does not match the architecture")
        self.params = []
        for (name, shape), p in zip(shapes, params):
            p = np.array(p, dtype=np.float64)
            if p.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {p.shape}")
            if not np.all(np.isfinite(p)):
                raise ValueError(f"{name}: non-finite parameters")
            self.params.append(p)
        self.train_meta = dict(train_meta or {})

    @property
    def k(self):
        return self.arch.k

    def _run(self, x, dropout_rng=None):
        """Forward pass keeping the activations needed for backprop."""
        arch, params = self.arch, self.params
        z0 = kernels.conv_forward(x, params[0], params[1])
        a = np.maximum(z0, 0.0).reshape(len(x), -1)
        acts, masks = [a], []
        for i in range(len(arch.hidden_layers)):
            a = np.maximum(a @ params[2 + 2 * i] + params[3 + 2 * i], 0.0)
            if dropout_rng is not None and arch.dropout_rate > 0:
                keep = dropout_rng.random(a.shape) >= arch.dropout_rate
                mask = keep / (1.0 - arch.dropout_rate)
                a = a * mask
            else:
                mask = None
            masks.append(mask)
            acts.append(a)
        logits = a @ params[-2] + params[-1]
        return logits, (z0, acts, masks)

    def logits(self, x):
        return self._run(x)[0]

    def _backward(self, x, cache, dlogits, want_params=True, want_input=False):
        arch, params = self.arch, self.params
        z0, acts, masks = cache
        nh = len(arch.hidden_layers)
        grads = [None] * len(params)
        grads[-2] = acts[-1].T @ dlogits if want_params else None
        grads[-1] = dlogits.sum(axis=0) if want_params else None
        da = dlogits @ params[-2].T
        for i in reversed(range(nh)):
            a = acts[i + 1]
            if masks[i] is not None:
                da = da * masks[i]
            dz = da * (a > 0)
            if want_params:
                grads[2 + 2 * i] = acts[i].T @ dz
                grads[3 + 2 * i] = dz.sum(axis=0)
            da = dz @ params[2 + 2 * i].T
        dz0 = da.reshape(z0.shape) * (z0 > 0)
        if want_params:
            grads[0], grads[1] = kernels.conv_grad_params(x, dz0, arch.conv_kernel)
        dx = kernels.conv_grad_input(dz0, params[0], arch.k) if want_input else None
        return grads, dx

    def logit_backward(self, x, dlogits):
        logits, cache = self._run(x)
        return self._backward(x, cache, dlogits, want_params=False, want_input=True)[1]

    def forward(self, x, train=False, rng=None):
        """Class probabilities; dropout is active only when ``train`` is set."""
        x, single = self._check(x)
        if train and rng is None:
            raise ValueError("train-mode forward needs an rng for dropout")
        p = softmax(self._run(x, rng if train else None)[0])
        return p[0] if single else p

    def loss_and_param_grads(self, x, labels, rng=None):
        """Mean cross-entropy over the batch and its parameter gradients."""
        x, _ = self._check(x)
        logits, cache = self._run(x, rng)
        n = len(x)
        y = _onehot(labels, n)
        loss = float(-np.sum(log_softmax(logits) * y) / n)
        grads, _ = self._backward(x, cache, (softmax(logits) - y) / n)
        return loss, grads

    def copy(self):
        return Model(self.arch, [p.copy() for p in self.params], self.train_meta)

    def same_params(self, other) -> bool:
        return self.arch == other.arch and all(np.array_equal(a, b) for a, b in zip(self.params, other.params))


class LinearSoftmax(Classifier):
    """logits = flatten(x) @ w + b.  Reference model with closed-form gradients."""

    def __init__(self, w, b=None, k: int = DEFAULT_K):
        self.k = k
        self.w = np.asarray(w, dtype=np.float64).reshape(2 * k, 2)
        self.b = np.zeros(2) if b is None else np.asarray(b, dtype=np.float64)

    def logits(self, x):
        return x.reshape(len(x), -1) @ self.w + self.b

    def logit_backward(self, x, dlogits):
        return (dlogits @ self.w.T).reshape(x.shape)


def init_model(arch: ArchSpec, rng: np.random.Generator) -> Model:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    params = []
    for name, shape in arch.param_shapes():
        if name.endswith(".b"):
            params.append(np.zeros(shape))
            continue
        fan_in = shape[1] if name == "conv.w" else shape[0]
        lim = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-lim, lim, size=shape))
    return Model(arch, params)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# functional API ---------------------------------------------------------------


def forward(m: Model, x, train: bool = False, rng=None):
    return m.forward(x, train=train, rng=rng)


def _frame_input(frame):
    return to_real(frame) if isinstance(frame, IqFrame) else np.asarray(frame, dtype=np.float64)


def classify(m: Classifier, frame) -> Label:
    return Label.SIGNAL if bool(m.is_signal(_frame_input(frame))) else Label.NOISE


def loss(m: Classifier, x, label) -> float:
    return float(m.loss(_frame_input(x), int(label)))


def input_gradient(m: Classifier, x, target=Label.NOISE) -> np.ndarray:
    return m.input_gradient(_frame_input(x), int(target))


def complex_gradient(g: np.ndarray) -> np.ndarray:
    """Complex view g_I + j g_Q of a real ``(..., 2, k)`` gradient."""
    return g[..., 0, :] + 1j * g[..., 1, :]


def frames_to_arrays(data):
    if not data:
        raise ValueError("empty dataset")
    x = np.stack([to_real(d.frame) for d in data])
    y = np.array([int(d.label) for d in data])
    return x, y


def accuracy(m: Classifier, data) -> float:
    if isinstance(data, tuple):
        x, y = data
    else:
        x, y = frames_to_arrays(data)
    if len(y) == 0:
        raise ValueError("empty dataset")
    pred = np.where(m.is_signal(x), int(Label.SIGNAL), int(Label.NOISE))
    return float(np.mean(pred == y))


def train_arrays(x, y, arch: ArchSpec, cfg: TrainConfig) -> Model:
    """Adam on mean cross-entropy; deterministic given ``cfg.seed``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if len(y) < cfg.batch_size:
        raise ValueError("need at least batch_size examples")
    init_rng, split_rng, loop_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))

    perm = split_rng.permutation(len(y))
    n_val = max(1, int(round(cfg.validation_fraction * len(y))))
    val, tr = perm[:n_val], perm[n_val:]

    model = init_model(arch, init_rng)
    opt = Adam(model.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    for _ in range(cfg.epochs):
        order = tr[loop_rng.permutation(len(tr))]
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = model.loss_and_param_grads(x[idx], y[idx], rng=loop_rng)
            opt.step(grads)

    model.train_meta = {
        "epochs": cfg.epochs,
        "n_train": int(len(tr)),
        "n_val": int(n_val),
        "train_accuracy": accuracy(model, (x[tr], y[tr])),
        "val_accuracy": accuracy(model, (x[val], y[val])),
    }
    return model


def train(data, arch: ArchSpec, cfg: TrainConfig) -> Model:
    """Train on a list of :class:`LabeledFrame`."""
    x, y = frames_to_arrays(data)
    return train_arrays(x, y, arch, cfg)

