"""Two-network constitutive model with derived stress and dissipation.

One sub-network predicts the plastic-strain increment from the state and
the strain increment; a second one predicts the stored energy at the
updated state.  Stress is the strain-gradient of the learned energy and
the dissipation rate is the negative product of its plastic-strain
gradient with the backward-difference rate, so the energy balance holds
by construction and only the sign of the dissipation is left to the data.

Training minimizes MAE over all four outputs.  The stress and dissipation
terms back-propagate through the energy network's input Jacobian, and
their gradient with respect to the increment network flows through the
energy network's input-gradient route, so the full composite is trained
end to end with exact derivatives.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import network as nc
from .training import run_training


class InconsistentDataError(ValueError):
    """Training data violate the dissipation inequality."""


@dataclass
class TannModel:
    snn_zeta: nc.Network
    snn_f: nc.Network
    dt: float = 1.0

    @property
    def dim(self):
        return self.snn_f.input_dim // 2

    def n_parameters(self):
        return nc.n_parameters(self.snn_zeta) + nc.n_parameters(self.snn_f)


@dataclass
class TannOutput:
    d_zeta: np.ndarray
    f_next: np.ndarray
    d_sigma: np.ndarray
    d_next: np.ndarray
    sigma_next: np.ndarray


DEFAULT_HIDDEN = {1: {"zeta": (6,), "f": (9,)}, 3: {"zeta": (48, 48), "f": (36,)}}
TERMS = ("d_zeta", "f_next", "d_sigma", "d_next")


def zeta_inputs(eps_next, d_eps, sigma_t, zeta_t):
    return np.hstack([eps_next, d_eps, sigma_t, zeta_t])


def dataset_arrays(ds):
    """Design matrices and target dict for one dataset."""
    eps_next = ds.eps_t + ds.d_eps
    x_zeta = zeta_inputs(eps_next, ds.d_eps, ds.sigma_t, ds.zeta_t)
    x_f = np.hstack([eps_next, ds.zeta_t + ds.d_zeta])
    targets = {"d_zeta": ds.d_zeta, "f_next": ds.f_next[:, None],
               "d_sigma": ds.d_sigma, "d_next": ds.d_next[:, None]}
    return x_zeta, x_f, targets


def build_tann(ds, train_idx, seed, hidden_zeta=None, hidden_f=None, dt=None):
    """Fresh model sized for a dataset, with normalization frozen from the
    training rows (z-scores per feature)."""
    dim = ds.dim
    hidden_zeta = hidden_zeta or DEFAULT_HIDDEN[dim]["zeta"]
    hidden_f = hidden_f or DEFAULT_HIDDEN[dim]["f"]
    x_zeta, x_f, targets = dataset_arrays(ds.subset(train_idx))
    rng = np.random.default_rng(seed)
    snn_zeta = nc.make_network(
        [4 * dim, *hidden_zeta, dim], "leaky_relu", rng,
        input_norm=nc.AffineNorm.from_data(x_zeta),
        output_norm=nc.AffineNorm.scale_from_data(targets["d_zeta"]),
    )
    snn_f = nc.make_network(
        [2 * dim, *hidden_f, 1], "elu_z2", rng,
        input_norm=nc.AffineNorm.from_data(x_f),
        output_norm=nc.AffineNorm.scale_from_data(targets["f_next"]),
    )
    return TannModel(snn_zeta=snn_zeta, snn_f=snn_f,
                     dt=float(ds.meta.get("dt", 1.0)) if dt is None else dt)


def _rows(model, *arrays):
    dim = model.dim
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float).reshape(-1, dim) if np.ndim(a) else np.full((1, dim), float(a))
        out.append(a)
    n = max(a.shape[0] for a in out)
    return [np.broadcast_to(a, (n, dim)) if a.shape[0] == 1 else a for a in out]


def tann_forward(model, eps_t, d_eps, sigma_t, zeta_t):
    """One incremental prediction (vectorized over rows).

    Computes in order: updated strain, plastic increment, backward-
    difference rate, updated energy, dissipation from the energy's
    plastic-strain gradient, and stress from its strain gradient.
    """
    single = np.ndim(eps_t) <= 1
    eps_t, d_eps, sigma_t, zeta_t = _rows(model, eps_t, d_eps, sigma_t, zeta_t)
    dim = model.dim
    eps_next = eps_t + d_eps
    d_zeta = np.atleast_2d(model.snn_zeta.forward(zeta_inputs(eps_next, d_eps, sigma_t, zeta_t)))
    zeta_next = zeta_t + d_zeta
    f, jac = model.snn_f.forward_with_jacobian(np.hstack([eps_next, zeta_next]))
    f = np.atleast_2d(f)
    jac = jac.reshape(-1, 1, 2 * dim)
    sigma_next = jac[:, 0, :dim]
    d_next = -np.sum(jac[:, 0, dim:] * d_zeta, axis=1) / model.dt
    out = TannOutput(d_zeta=d_zeta, f_next=f[:, 0], d_sigma=sigma_next - sigma_t,
                     d_next=d_next, sigma_next=sigma_next)
    if single:
        return TannOutput(*(a[0] for a in
                            (out.d_zeta, out.f_next, out.d_sigma, out.d_next, out.sigma_next)))
    return out


def dissipation_output(model, eps_next, zeta_next, zeta_dot):
    """Dissipation route in isolation: -dF/dzeta . zeta_dot at a fixed
    updated state; linear in ``zeta_dot`` by construction."""
    x = np.hstack([np.asarray(eps_next, float).reshape(-1, model.dim),
                   np.asarray(zeta_next, float).reshape(-1, model.dim)])
    _, jac = model.snn_f.forward_with_jacobian(x)
    jac = jac.reshape(-1, 1, 2 * model.dim)
    zd = np.asarray(zeta_dot, float).reshape(-1, model.dim)
    return -np.sum(jac[:, 0, model.dim:] * zd, axis=1)


def default_loss_weights(targets):
    """Inverse mean-absolute-target weights, balancing term magnitudes."""
    out = {}
    for name in TERMS:
        mean = float(np.mean(np.abs(targets[name])))
        out[name] = 1.0 / mean if mean > 0.0 else 1.0
    return out


class _TannAdapter:
    """Gradient/loss plumbing that lets the composite reuse the generic
    training loop."""

    def __init__(self, model, data, weights):
        self.model = model
        self.data = data  # split -> (x_zeta, targets)
        self.term_weights = dict(weights)
        self.n_train = data["train"][0].shape[0]
        self.n_zeta = nc.n_parameters(model.snn_zeta)

    def get_params(self):
        return np.concatenate([nc.get_params(self.model.snn_zeta),
                               nc.get_params(self.model.snn_f)])

    def set_params(self, vec):
        nc.set_params(self.model.snn_zeta, vec[: self.n_zeta])
        nc.set_params(self.model.snn_f, vec[self.n_zeta :])

    def _forward_traces(self, x_zeta):
        model = self.model
        dim = model.dim
        tr_z = nc.forward_trace(model.snn_zeta, x_zeta, need_jacobian=False)
        d_zeta = np.atleast_2d(tr_z.y)
        zeta_next = x_zeta[:, 3 * dim :] + d_zeta
        x_f = np.hstack([x_zeta[:, :dim], zeta_next])
        tr_f = nc.forward_trace(model.snn_f, x_f, need_jacobian=True)
        return tr_z, tr_f, d_zeta

    def _predictions(self, tr_f, d_zeta, sigma_t):
        dim = self.model.dim
        jac = tr_f.jac.reshape(-1, 1, 2 * dim)
        sigma_next = jac[:, 0, :dim]
        return {
            "d_zeta": d_zeta,
            "f_next": np.atleast_2d(tr_f.y),
            "d_sigma": sigma_next - sigma_t,
            "d_next": (-np.sum(jac[:, 0, dim:] * d_zeta, axis=1) / self.model.dt)[:, None],
        }

    def batch_gradient(self, idx):
        model = self.model
        dim = model.dim
        x_zeta, targets = self.data["train"]
        xb = x_zeta[idx]
        tb = {k: v[idx] for k, v in targets.items()}
        tr_z, tr_f, d_zeta = self._forward_traces(xb)
        preds = self._predictions(tr_f, d_zeta, xb[:, 2 * dim : 3 * dim])
        n = xb.shape[0]
        sign = {k: self.term_weights[k] * np.sign(preds[k] - tb[k]) / tb[k].size
                for k in TERMS}
        jac = tr_f.jac.reshape(n, 1, 2 * dim)
        zeta_dot = d_zeta / model.dt
        # upstream gradients for the energy network: value and Jacobian routes
        gy_f = sign["f_next"]
        gjac = np.zeros((n, 1, 2 * dim))
        gjac[:, 0, :dim] = sign["d_sigma"]
        gjac[:, 0, dim:] = -sign["d_next"] * zeta_dot
        grads_f, gx_f = nc.vjp(tr_f, gy_f, gjac)
        # chain every route that touches the predicted increment
        g_dzeta = (sign["d_zeta"]
                   + gx_f[:, dim:]
                   - sign["d_next"] * jac[:, 0, dim:] / model.dt)
        grads_z, _ = nc.vjp(tr_z, g_dzeta, None)
        return np.concatenate([nc.grads_to_vector(model.snn_zeta, grads_z),
                               nc.grads_to_vector(model.snn_f, grads_f)])

    def split_losses(self, split):
        x_zeta, targets = self.data[split]
        _, tr_f, d_zeta = self._forward_traces(x_zeta)
        preds = self._predictions(tr_f, d_zeta, x_zeta[:, 2 * self.model.dim : 3 * self.model.dim])
        return {k: float(np.mean(np.abs(preds[k] - targets[k]))) for k in TERMS}


def check_dissipation_targets(ds):
    if np.any(ds.d_next < 0.0):
        bad = int(np.sum(ds.d_next < 0.0))
        raise InconsistentDataError(
            f"thermodynamically inconsistent training set: {bad} record(s) "
            "with negative dissipation")


def tann_train(model, ds, splits, cfg, weights=None):
    """Train against a dataset's train/val splits; returns (model, history).

    Datasets carrying any negative dissipation target are rejected before
    any parameter update.
    """
    check_dissipation_targets(ds)
    data = {}
    for split in ("train", "val"):
        sub = ds.subset(splits[split])
        x_zeta, _, targets = dataset_arrays(sub)
        data[split] = (x_zeta, targets)
    if weights is None:
        weights = default_loss_weights(data["train"][1])
    adapter = _TannAdapter(model, data, weights)
    history = run_training(adapter, cfg)
    return model, history


# ---------------------------------------------------------------------------
# recall mode


@dataclass
class Trajectory:
    kind: str
    eps: np.ndarray  # (n_steps + 1, dim)
    sigma: np.ndarray
    zeta: np.ndarray
    f: np.ndarray
    d: np.ndarray
    route_gap: np.ndarray | None = None  # per-step two-route sigma mismatch
    truncated_at: int | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.eps.shape[0]


def recall(model, initial, path, provenance=None):
    """Self-fed prediction along a strain-increment sequence.

    Each step feeds the predicted stress and plastic strain back as the
    next state.  Non-finite predictions truncate the trajectory and set
    ``truncated_at``.
    """
    dim = model.dim
    eps = np.asarray(initial.eps, dtype=float).reshape(dim)
    sigma = np.asarray(initial.sigma, dtype=float).reshape(dim)
    zeta = np.asarray(initial.zeta, dtype=float).reshape(dim)
    incs = np.asarray(path, dtype=float).reshape(-1, dim)
    n = incs.shape[0]
    out = Trajectory(kind="tann",
                     eps=np.zeros((n + 1, dim)), sigma=np.zeros((n + 1, dim)),
                     zeta=np.zeros((n + 1, dim)), f=np.zeros(n + 1), d=np.zeros(n + 1),
                     route_gap=np.zeros(n + 1), provenance=provenance or {})
    out.eps[0], out.sigma[0], out.zeta[0] = eps, sigma, zeta
    out.f[0] = float(model.snn_f.forward(np.concatenate([eps, zeta]))[0])
    for i in range(n):
        step = tann_forward(model, eps, incs[i], sigma, zeta)
        values = np.concatenate([np.atleast_1d(step.sigma_next),
                                 np.atleast_1d(step.d_zeta),
                                 [float(step.f_next), float(step.d_next)]])
        if not np.all(np.isfinite(values)):
            out.truncated_at = i + 1
            out.eps = out.eps[: i + 1]
            out.sigma = out.sigma[: i + 1]
            out.zeta = out.zeta[: i + 1]
            out.f = out.f[: i + 1]
            out.d = out.d[: i + 1]
            out.route_gap = out.route_gap[: i + 1]
            break
        eps = eps + incs[i]
        zeta = zeta + np.atleast_1d(step.d_zeta)
        sigma = np.atleast_1d(step.sigma_next)
        out.eps[i + 1], out.sigma[i + 1], out.zeta[i + 1] = eps, sigma, zeta
        out.f[i + 1] = float(step.f_next)
        out.d[i + 1] = float(step.d_next)
        # re-evaluate the stress route as a purity check
        _, jac = model.snn_f.forward_with_jacobian(np.concatenate([eps, zeta]))
        out.route_gap[i + 1] = float(np.max(np.abs(jac[0, :dim] - sigma)))
    return out


@dataclass
class ConsistencyReport:
    min_d: float
    n_violations: int
    violation_steps: list
    max_route_gap: float
    passed: bool


def consistency_check(traj, tol):
    """Scan a trajectory for negative predicted dissipation.

    ``tol`` is the admissible magnitude below zero (same units as D).
    """
    d = np.asarray(traj.d, dtype=float)
    bad = np.flatnonzero(d < -tol)
    gap = float(np.max(traj.route_gap)) if traj.route_gap is not None and len(traj.route_gap) else 0.0
    return ConsistencyReport(
        min_d=float(d.min()) if d.size else math.nan,
        n_violations=int(bad.size),
        violation_steps=bad.tolist(),
        max_route_gap=gap,
        passed=bool(bad.size == 0),
    )


# ---------------------------------------------------------------------------
# bundles


def save_bundle(model, dirpath, meta=None):
    os.makedirs(dirpath, exist_ok=True)
    nc.save_json(model.snn_zeta, os.path.join(dirpath, "snn_zeta.json"))
    nc.save_json(model.snn_f, os.path.join(dirpath, "snn_f.json"))
    doc = {"kind": "tann", "dt": model.dt, "dim": model.dim}
    doc.update(meta or {})
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_bundle(dirpath):
    with open(os.path.join(dirpath, "meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("kind") != "tann":
        raise ValueError(f"not a tann bundle: {dirpath}")
    model = TannModel(
        snn_zeta=nc.load_json(os.path.join(dirpath, "snn_zeta.json")),
        snn_f=nc.load_json(os.path.join(dirpath, "snn_f.json")),
        dt=float(meta.get("dt", 1.0)),
    )
    return model, meta
