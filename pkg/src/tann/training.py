"""Seeded minibatch training with early stopping and per-term histories.

The loop is model-agnostic: anything exposing flat parameters, a batch
gradient, and per-term losses can be trained, which lets single networks
and composite two-network models share the same epoch machinery.  Batches
are drawn by a seeded shuffle each epoch and the parameters of the epoch
with the lowest validation loss are restored at the end, so a fixed seed
reproduces a run bit for bit.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .losses import LossSpec, loss_and_upstream, term_values
from .network import forward_trace, get_params, grads_to_vector, set_params, vjp
from .optimizer import Nadam, NonFiniteGradient


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 10
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (self.learning_rate > 0.0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")


@dataclass
class History:
    """Per-epoch, per-split, per-term loss records."""

    rows: list = field(default_factory=list)  # (epoch, split, term, value)
    best_epoch: int = -1

    def record(self, epoch, split, values):
        for term, value in values.items():
            self.rows.append((epoch, split, term, value))

    def series(self, split, term):
        return np.array([v for e, s, t, v in self.rows if s == split and t == term])

    def last(self, split, term):
        values = self.series(split, term)
        return float(values[-1]) if values.size else math.nan

    def n_epochs(self):
        return 1 + max((e for e, *_ in self.rows), default=-1)

    def save_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "split", "term", "value"])
            for row in self.rows:
                writer.writerow([row[0], row[1], row[2], repr(row[3])])


def run_training(adapter, cfg):
    """Generic loop: seeded shuffles, Nadam steps, early stop, best restore.

    The adapter contract: ``n_train``, ``term_weights`` (name -> weight),
    ``get_params()/set_params(vec)``, ``batch_gradient(indices)`` and
    ``split_losses(split)`` for splits "train" and "val".
    """
    rng = np.random.default_rng(cfg.seed)
    opt = Nadam(cfg.learning_rate)
    params = adapter.get_params()
    history = History()
    best_total = math.inf
    best_params = params.copy()
    since_best = 0
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(adapter.n_train)
        for start in range(0, adapter.n_train, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            try:
                grad = adapter.batch_gradient(idx)
                params = opt.step(params, grad)
            except NonFiniteGradient as exc:
                raise TrainingError(str(exc), epoch=epoch) from exc
            adapter.set_params(params)
        train_values = adapter.split_losses("train")
        val_values = adapter.split_losses("val")
        total_val = sum(adapter.term_weights[k] * v for k, v in val_values.items())
        if not math.isfinite(total_val):
            raise TrainingError("validation loss is not finite", epoch=epoch)
        history.record(epoch, "train", train_values)
        history.record(epoch, "val", val_values)
        if total_val < best_total:
            best_total = total_val
            best_params = params.copy()
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    adapter.set_params(best_params)
    return history


class _NetAdapter:
    def __init__(self, net, spec, train_set, val_set):
        self.net = net
        self.spec = spec
        self.x_train, self.t_train = train_set
        self.x_val, self.t_val = val_set
        self.n_train = self.x_train.shape[0]
        self.term_weights = {t.name: t.weight for t in spec.terms}

    def get_params(self):
        return get_params(self.net)

    def set_params(self, vec):
        set_params(self.net, vec)

    def batch_gradient(self, idx):
        targets = {k: v[idx] for k, v in self.t_train.items()}
        tr = forward_trace(self.net, self.x_train[idx], need_jacobian=self.spec.needs_jacobian)
        _, gy, gjac = loss_and_upstream(self.spec, tr.y, tr.jac, targets)
        grads, _ = vjp(tr, gy, gjac)
        return grads_to_vector(self.net, grads)

    def split_losses(self, split):
        x, targets = (self.x_train, self.t_train) if split == "train" else (self.x_val, self.t_val)
        tr = forward_trace(self.net, x, need_jacobian=self.spec.needs_jacobian)
        return term_values(self.spec, tr.y, tr.jac, targets)


def train(net, train_set, val_set, spec, cfg):
    """Fit one network against a :class:`LossSpec`; returns (net, history).

    ``train_set``/``val_set`` are ``(inputs, targets-dict)`` pairs.  The
    returned network carries the parameters of the best validation epoch.
    """
    if not isinstance(spec, LossSpec):
        spec = LossSpec(tuple(spec))
    x_train = np.atleast_2d(np.asarray(train_set[0], dtype=float))
    x_val = np.atleast_2d(np.asarray(val_set[0], dtype=float))
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation sets must be non-empty")
    spec.validate(net, train_set[1])
    adapter = _NetAdapter(net, spec, (x_train, train_set[1]), (x_val, val_set[1]))
    history = run_training(adapter, cfg)
    return net, history
