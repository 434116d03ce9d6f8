"""Thermodynamics-agnostic reference predictor for head-to-head runs.

Two chained networks predict the plastic-strain increment and then the
stress increment directly, with no potential in between; stored energy
and dissipation are reconstructed afterwards from the analytic material
definitions applied to the predicted kinematics.  Reconstructed
dissipation uses the conjugate-force product X . d_zeta/dt, which unlike
k|d_zeta|/dt can come out negative and therefore exposes inconsistent
predictions.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import network as nc
from .materials import potentials
from .tann_model import Trajectory, check_dissipation_targets
from .training import run_training

BASELINE_HIDDEN = {1: (6,), 3: (48, 48)}
TERMS = ("d_zeta", "d_sigma")


@dataclass
class BaselineModel:
    ann_zeta: nc.Network
    ann_sigma: nc.Network
    dt: float = 1.0

    @property
    def dim(self):
        return self.ann_sigma.output_dim

    def n_parameters(self):
        return nc.n_parameters(self.ann_zeta) + nc.n_parameters(self.ann_sigma)


def _design(ds):
    eps_next = ds.eps_t + ds.d_eps
    x_zeta = np.hstack([eps_next, ds.d_eps, ds.sigma_t, ds.zeta_t])
    targets = {"d_zeta": ds.d_zeta, "d_sigma": ds.d_sigma}
    return x_zeta, targets


def build_baseline(ds, train_idx, seed, hidden=None, dt=None):
    dim = ds.dim
    hidden = hidden or BASELINE_HIDDEN[dim]
    sub = ds.subset(train_idx)
    x_zeta, targets = _design(sub)
    x_sigma = np.hstack([sub.eps_t + sub.d_eps, sub.d_eps,
                         sub.zeta_t + sub.d_zeta, sub.d_zeta])
    rng = np.random.default_rng(seed)
    ann_zeta = nc.make_network(
        [4 * dim, *hidden, dim], "leaky_relu", rng,
        input_norm=nc.AffineNorm.from_data(x_zeta),
        output_norm=nc.AffineNorm.scale_from_data(targets["d_zeta"]),
    )
    ann_sigma = nc.make_network(
        [4 * dim, *hidden, dim], "leaky_relu", rng,
        input_norm=nc.AffineNorm.from_data(x_sigma),
        output_norm=nc.AffineNorm.scale_from_data(targets["d_sigma"]),
    )
    return BaselineModel(ann_zeta=ann_zeta, ann_sigma=ann_sigma,
                         dt=float(ds.meta.get("dt", 1.0)) if dt is None else dt)


def ann_forward(model, eps_t, d_eps, sigma_t, zeta_t):
    """Predict (d_zeta, d_sigma); the stress network consumes the freshly
    predicted increment and the updated plastic strain."""
    dim = model.dim
    single = np.ndim(eps_t) <= 1
    to2 = lambda a: np.asarray(a, dtype=float).reshape(-1, dim)
    eps_t, d_eps, sigma_t, zeta_t = map(to2, (eps_t, d_eps, sigma_t, zeta_t))
    eps_next = eps_t + d_eps
    d_zeta = np.atleast_2d(model.ann_zeta.forward(
        np.hstack([eps_next, d_eps, sigma_t, zeta_t])))
    d_sigma = np.atleast_2d(model.ann_sigma.forward(
        np.hstack([eps_next, d_eps, zeta_t + d_zeta, d_zeta])))
    if single:
        return d_zeta[0], d_sigma[0]
    return d_zeta, d_sigma


class _BaselineAdapter:
    def __init__(self, model, data, weights):
        self.model = model
        self.data = data
        self.term_weights = dict(weights)
        self.n_train = data["train"][0].shape[0]
        self.n_zeta = nc.n_parameters(model.ann_zeta)

    def get_params(self):
        return np.concatenate([nc.get_params(self.model.ann_zeta),
                               nc.get_params(self.model.ann_sigma)])

    def set_params(self, vec):
        nc.set_params(self.model.ann_zeta, vec[: self.n_zeta])
        nc.set_params(self.model.ann_sigma, vec[self.n_zeta :])

    def _traces(self, x_zeta):
        dim = self.model.dim
        tr_z = nc.forward_trace(self.model.ann_zeta, x_zeta, need_jacobian=False)
        d_zeta = np.atleast_2d(tr_z.y)
        x_sigma = np.hstack([x_zeta[:, :dim], x_zeta[:, dim : 2 * dim],
                             x_zeta[:, 3 * dim :] + d_zeta, d_zeta])
        tr_s = nc.forward_trace(self.model.ann_sigma, x_sigma, need_jacobian=False)
        return tr_z, tr_s, d_zeta

    def batch_gradient(self, idx):
        dim = self.model.dim
        x_zeta, targets = self.data["train"]
        xb = x_zeta[idx]
        tb = {k: v[idx] for k, v in targets.items()}
        tr_z, tr_s, d_zeta = self._traces(xb)
        d_sigma = np.atleast_2d(tr_s.y)
        g_sigma = self.term_weights["d_sigma"] * np.sign(d_sigma - tb["d_sigma"]) / tb["d_sigma"].size
        grads_s, gx_s = nc.vjp(tr_s, g_sigma, None)
        g_dzeta = (self.term_weights["d_zeta"] * np.sign(d_zeta - tb["d_zeta"]) / tb["d_zeta"].size
                   + gx_s[:, 2 * dim : 3 * dim] + gx_s[:, 3 * dim :])
        grads_z, _ = nc.vjp(tr_z, g_dzeta, None)
        return np.concatenate([nc.grads_to_vector(self.model.ann_zeta, grads_z),
                               nc.grads_to_vector(self.model.ann_sigma, grads_s)])

    def split_losses(self, split):
        x_zeta, targets = self.data[split]
        _, tr_s, d_zeta = self._traces(x_zeta)
        return {"d_zeta": float(np.mean(np.abs(d_zeta - targets["d_zeta"]))),
                "d_sigma": float(np.mean(np.abs(np.atleast_2d(tr_s.y) - targets["d_sigma"])))}


def ann_train(model, ds, splits, cfg, weights=None):
    """Same optimizer, loss metric, and stopping rule as the paired
    thermodynamics-aware run, but only (d_zeta, d_sigma) terms."""
    check_dissipation_targets(ds)
    data = {}
    for split in ("train", "val"):
        data[split] = _design(ds.subset(splits[split]))
    if weights is None:
        weights = {}
        for name in TERMS:
            mean = float(np.mean(np.abs(data["train"][1][name])))
            weights[name] = 1.0 / mean if mean > 0.0 else 1.0
    adapter = _BaselineAdapter(model, data, weights)
    history = run_training(adapter, cfg)
    return model, history


def recall_baseline(model, initial, path, provenance=None):
    """Self-fed prediction; energy/dissipation left for reconstruction."""
    dim = model.dim
    eps = np.asarray(initial.eps, dtype=float).reshape(dim)
    sigma = np.asarray(initial.sigma, dtype=float).reshape(dim)
    zeta = np.asarray(initial.zeta, dtype=float).reshape(dim)
    incs = np.asarray(path, dtype=float).reshape(-1, dim)
    n = incs.shape[0]
    traj = Trajectory(kind="ann",
                      eps=np.zeros((n + 1, dim)), sigma=np.zeros((n + 1, dim)),
                      zeta=np.zeros((n + 1, dim)), f=np.zeros(n + 1), d=np.zeros(n + 1),
                      route_gap=None, provenance=provenance or {})
    traj.eps[0], traj.sigma[0], traj.zeta[0] = eps, sigma, zeta
    for i in range(n):
        d_zeta, d_sigma = ann_forward(model, eps, incs[i], sigma, zeta)
        if not (np.all(np.isfinite(d_zeta)) and np.all(np.isfinite(d_sigma))):
            traj.truncated_at = i + 1
            for name in ("eps", "sigma", "zeta", "f", "d"):
                setattr(traj, name, getattr(traj, name)[: i + 1])
            break
        eps = eps + incs[i]
        zeta = zeta + d_zeta
        sigma = sigma + d_sigma
        traj.eps[i + 1], traj.sigma[i + 1], traj.zeta[i + 1] = eps, sigma, zeta
    return traj


def reconstruct_thermo(material, traj, dt=1.0):
    """Stored energy and dissipation from the analytic definitions applied
    to a trajectory's kinematics.

    F comes from the energy potential at each (eps, zeta); D at step t+1
    is the conjugate force at the updated state times d_zeta/dt, so a
    plastic increment against the driving force shows up as negative
    dissipation.  Returns (f_series, d_series).
    """
    eps = np.asarray(traj.eps, dtype=float)
    zeta = np.asarray(traj.zeta, dtype=float)
    if material.dim == 1:
        f, _, _, x, _ = potentials(material, eps[:, 0], zeta[:, 0], np.zeros(len(eps)))
        x = np.asarray(x, dtype=float)[:, None]
    else:
        f, _, _, x, _ = potentials(material, eps, zeta, np.zeros_like(eps))
    d = np.zeros(eps.shape[0])
    if eps.shape[0] > 1:
        d_zeta = np.diff(zeta, axis=0)
        d[1:] = np.sum(x[1:] * d_zeta, axis=1) / dt
    return np.asarray(f, dtype=float), d


def attach_thermo(material, traj, dt=1.0):
    traj.f, traj.d = reconstruct_thermo(material, traj, dt=dt)
    return traj


def parameter_parity(tann_model, ann_model):
    """Trainable-parameter comparison for a paired run."""
    n_t = tann_model.n_parameters()
    n_a = ann_model.n_parameters()
    return {"tann": n_t, "ann": n_a,
            "ratio": n_a / n_t if n_t else float("nan"),
            "within_5_percent": bool(abs(n_a - n_t) <= 0.05 * n_t)}


def save_bundle(model, dirpath, meta=None):
    os.makedirs(dirpath, exist_ok=True)
    nc.save_json(model.ann_zeta, os.path.join(dirpath, "ann_zeta.json"))
    nc.save_json(model.ann_sigma, os.path.join(dirpath, "ann_sigma.json"))
    doc = {"kind": "ann", "dt": model.dt, "dim": model.dim}
    doc.update(meta or {})
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_bundle(dirpath):
    with open(os.path.join(dirpath, "meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("kind") != "ann":
        raise ValueError(f"not a baseline bundle: {dirpath}")
    model = BaselineModel(
        ann_zeta=nc.load_json(os.path.join(dirpath, "ann_zeta.json")),
        ann_sigma=nc.load_json(os.path.join(dirpath, "ann_sigma.json")),
        dt=float(meta.get("dt", 1.0)),
    )
    return model, meta
