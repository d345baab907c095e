"""Minibatch SGD training of a generator/discriminator pair.

Each outer iteration takes ``k`` discriminator ascent steps on
``mean log D(x) + mean log(1 - D(G(z)))`` and then one generator step,
either descending ``mean log(1 - D(G(z)))`` (saturating) or ascending
``mean log D(G(z))`` (non-saturating).
"""

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..exceptions import NumericError, ValidationError
from .nets import DenseNet
from .objective import clamped_log_grad, clamped_value

__all__ = [
    "GanConfig",
    "TrainMetrics",
    "TrainResult",
    "d_objective_and_grad",
    "d_step",
    "g_objective_and_grad",
    "g_step",
    "gaussian_target",
    "train",
]

NOISE_KINDS = ("gaussian", "uniform")
G_LOSSES = ("saturating", "non-saturating")


@dataclass(frozen=True)
class GanConfig:
    data_dim: int = 1
    noise_dim: int = 2
    noise: str = "gaussian"
    batch_size: int = 64
    k: int = 1
    lr_d: float = 0.05
    lr_g: float = 0.05
    iterations: int = 5000
    seed: int = 7
    epsilon: float = 1e-7
    g_loss: str = "saturating"
    hidden: tuple = (16,)
    init_scale: float = 0.05
    # synthetic target used when no data is supplied
    target_mean: float = 3.0
    target_std: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.data_dim < 1 or self.noise_dim < 1:
            raise ValidationError("data_dim and noise_dim must be >= 1")
        if self.noise not in NOISE_KINDS:
            raise ValidationError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.batch_size < 1 or self.k < 1:
            raise ValidationError("batch_size and k must be >= 1")
        if not (self.lr_d > 0 and self.lr_g > 0):
            raise ValidationError("learning rates must be > 0")
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if not 0.0 < self.epsilon < 0.1:
            raise ValidationError(f"epsilon must lie in (0, 0.1), got {self.epsilon}")
        if self.g_loss not in G_LOSSES:
            raise ValidationError(f"g_loss must be one of {G_LOSSES}, got {self.g_loss!r}")
        if any(h < 1 for h in self.hidden) or self.init_scale <= 0 or self.target_std <= 0:
            raise ValidationError("hidden sizes, init_scale and target_std must be positive")

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValidationError(f"unknown GAN config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValidationError("GAN config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self):
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc


@dataclass
class TrainMetrics:
    d_obj: list = field(default_factory=list)
    g_obj: list = field(default_factory=list)
    mean_d_real: list = field(default_factory=list)
    mean_d_fake: list = field(default_factory=list)

    def __len__(self):
        return len(self.d_obj)

    def append(self, d_obj, g_obj, mean_d_real, mean_d_fake):
        self.d_obj.append(float(d_obj))
        self.g_obj.append(float(g_obj))
        self.mean_d_real.append(float(mean_d_real))
        self.mean_d_fake.append(float(mean_d_fake))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "d_obj", "g_obj", "mean_d_real", "mean_d_fake"])
        for i, row in enumerate(zip(self.d_obj, self.g_obj, self.mean_d_real, self.mean_d_fake)):
            writer.writerow([i, *(repr(v) for v in row)])
        return buf.getvalue()


class TrainResult(NamedTuple):
    generator: DenseNet
    discriminator: DenseNet
    metrics: TrainMetrics


def init_nets(config, rng):
    G = DenseNet.init([config.noise_dim, *config.hidden, config.data_dim], rng, "identity", config.init_scale)
    D = DenseNet.init([config.data_dim, *config.hidden, 1], rng, "sigmoid", config.init_scale)
    return G, D


def sample_noise(config, rng, m):
    if config.noise == "uniform":
        return rng.uniform(-1.0, 1.0, size=(m, config.noise_dim))
    return rng.standard_normal((m, config.noise_dim))


def gaussian_target(config):
    def sample(rng, m):
        return rng.normal(config.target_mean, config.target_std, size=(m, config.data_dim))

    return sample


def d_objective_and_grad(G, D, x_real, z, epsilon):
    """Discriminator objective and its gradient w.r.t. D's parameters.

    Returns ``(value, weight_grads, bias_grads, mean_d_real, mean_d_fake)``.
    """
    fake = G.forward(z)
    d_real, cache_r = D.forward(x_real, return_cache=True)
    d_fake, cache_f = D.forward(fake, return_cache=True)
    value = clamped_value(d_real, d_fake, epsilon)
    m_r, m_f = len(d_real), len(d_fake)
    gw_r, gb_r, _ = D.backward(cache_r, clamped_log_grad(d_real, epsilon) / m_r)
    gw_f, gb_f, _ = D.backward(cache_f, -clamped_log_grad(1.0 - d_fake, epsilon) / m_f)
    gw = [a + b for a, b in zip(gw_r, gw_f)]
    gb = [a + b for a, b in zip(gb_r, gb_f)]
    return value, gw, gb, float(d_real.mean()), float(d_fake.mean())


def g_objective_and_grad(G, D, z, epsilon, g_loss="saturating"):
    """Generator objective and its gradient w.r.t. G's parameters.

    Saturating: ``mean log(1 - D(G(z)))`` (to be minimized).
    Non-saturating: ``mean log D(G(z))`` (to be maximized).
    """
    fake, cache_g = G.forward(z, return_cache=True)
    d_fake, cache_d = D.forward(fake, return_cache=True)
    m = len(d_fake)
    lo, hi = epsilon, 1.0 - epsilon
    if g_loss == "saturating":
        value = float(np.mean(np.log(np.clip(1.0 - d_fake, lo, hi))))
        upstream = -clamped_log_grad(1.0 - d_fake, epsilon) / m
    else:
        value = float(np.mean(np.log(np.clip(d_fake, lo, hi))))
        upstream = clamped_log_grad(d_fake, epsilon) / m
    _, _, g_input = D.backward(cache_d, upstream)
    gw, gb, _ = G.backward(cache_g, g_input)
    return value, gw, gb


def _check_finite(gw, gb, what, iteration, value=0.0):
    if not np.isfinite(value) or not all(np.all(np.isfinite(a)) for a in (*gw, *gb)):
        raise NumericError(f"non-finite {what} gradient", iteration=iteration)


def _apply(net, gw, gb, lr, what, iteration):
    try:
        return net.stepped(gw, gb, lr)
    except ValidationError:
        # the constructor rejects parameters that overflowed
        raise NumericError(f"{what} parameters overflowed", iteration=iteration) from None


def d_step(G, D, x_real, z, config, iteration=None, lr=None):
    """One ascent step for D. Returns ``(new_D, objective_before_step)``.

    ``lr`` overrides ``config.lr_d`` (zero is allowed here).
    """
    if len(x_real) != config.batch_size or len(z) != config.batch_size:
        raise ValidationError(f"batches must hold {config.batch_size} rows")
    value, gw, gb, _, _ = d_objective_and_grad(G, D, x_real, z, config.epsilon)
    _check_finite(gw, gb, "discriminator", iteration, value)
    lr = config.lr_d if lr is None else lr
    return _apply(D, gw, gb, lr, "discriminator", iteration), value


def g_step(G, D, z, config, iteration=None, lr=None):
    """One generator step. Returns ``(new_G, objective_before_step)``.

    ``lr`` overrides ``config.lr_g``.
    """
    if len(z) != config.batch_size:
        raise ValidationError(f"noise batch must hold {config.batch_size} rows")
    value, gw, gb = g_objective_and_grad(G, D, z, config.epsilon, config.g_loss)
    _check_finite(gw, gb, "generator", iteration, value)
    lr = config.lr_g if lr is None else lr
    if config.g_loss == "saturating":
        lr = -lr
    return _apply(G, gw, gb, lr, "generator", iteration), value


def train(config, sample_real=None):
    """Run the k-inner-step minibatch loop; deterministic given ``config.seed``.

    ``sample_real(rng, m)`` draws a data minibatch; by default it samples the
    Gaussian target described by the config. On a numeric failure the
    :class:`NumericError` carries the metrics recorded so far.
    """
    rng = np.random.default_rng(config.seed)
    G, D = init_nets(config, rng)
    sample_real = sample_real or gaussian_target(config)
    metrics = TrainMetrics()
    m = config.batch_size
    for it in range(config.iterations):
        try:
            for _ in range(config.k):
                z = sample_noise(config, rng, m)
                x = sample_real(rng, m)
                d_val, gw, gb, mean_real, mean_fake = d_objective_and_grad(G, D, x, z, config.epsilon)
                _check_finite(gw, gb, "discriminator", it, d_val)
                D = _apply(D, gw, gb, config.lr_d, "discriminator", it)
            G, g_val = g_step(G, D, sample_noise(config, rng, m), config, iteration=it)
        except NumericError as exc:
            exc.metrics = metrics
            raise
        metrics.append(d_val, g_val, mean_real, mean_fake)
    return TrainResult(G, D, metrics)
