"""Composite mean-absolute-error losses over outputs and Jacobian entries.

A loss is a weighted sum of MAE terms.  Each term targets either direct
output components or entries of the input Jacobian, so a single spec can
express e.g. "fit f and also fit df/dx".  At an exactly zero residual the
subgradient is taken as zero (``np.sign`` convention).
"""

from dataclasses import dataclass, field

import numpy as np

from .network import forward_trace, grads_to_vector, vjp


class LossConfigError(ValueError):
    """A loss term does not resolve against the network or targets."""


@dataclass(frozen=True)
class LossTerm:
    name: str
    kind: str  # "output" | "jacobian"
    target: str  # key into the targets dict
    rows: tuple = ()  # output component indices (kind="output")
    entries: tuple = ()  # (out, in) index pairs (kind="jacobian")
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("output", "jacobian"):
            raise LossConfigError(f"unknown loss term kind {self.kind!r}")
        if not (np.isfinite(self.weight) and self.weight > 0.0):
            raise LossConfigError("loss weights must be positive and finite")


@dataclass(frozen=True)
class LossSpec:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def needs_jacobian(self):
        return any(t.kind == "jacobian" for t in self.terms)

    def validate(self, net, targets):
        for t in self.terms:
            if t.target not in targets:
                raise LossConfigError(f"term {t.name!r}: no target {t.target!r}")
            if t.kind == "output":
                if any(r >= net.output_dim for r in t.rows):
                    raise LossConfigError(f"term {t.name!r}: output index out of range")
            else:
                for r, c in t.entries:
                    if r >= net.output_dim or c >= net.input_dim:
                        raise LossConfigError(f"term {t.name!r}: jacobian index out of range")


def _predictions(term, y, jac):
    if term.kind == "output":
        return y[:, list(term.rows)]
    rows = [r for r, _ in term.entries]
    cols = [c for _, c in term.entries]
    return jac[:, rows, cols]


def term_values(spec, y, jac, targets):
    """Unweighted MAE of each term; keys are term names."""
    out = {}
    for t in spec.terms:
        pred = _predictions(t, y, jac)
        tgt = np.atleast_2d(np.asarray(targets[t.target], dtype=float).T).T
        out[t.name] = float(np.mean(np.abs(pred - tgt)))
    return out


def total_loss(spec, values):
    return float(sum(t.weight * values[t.name] for t in spec.terms))


def loss_and_upstream(spec, y, jac, targets):
    """Per-term MAEs plus dL/dy and dL/dJacobian for the weighted total."""
    values = {}
    gy = np.zeros_like(y)
    gjac = np.zeros_like(jac) if jac is not None else None
    for t in spec.terms:
        pred = _predictions(t, y, jac)
        tgt = np.atleast_2d(np.asarray(targets[t.target], dtype=float).T).T
        resid = pred - tgt
        values[t.name] = float(np.mean(np.abs(resid)))
        g = t.weight * np.sign(resid) / resid.size
        if t.kind == "output":
            gy[:, list(t.rows)] += g
        else:
            rows = [r for r, _ in t.entries]
            cols = [c for _, c in t.entries]
            gjac[:, rows, cols] += g
    return values, gy, gjac


def param_gradients(net, x, targets, spec):
    """Gradient of the composite loss over a batch, one flat vector.

    Terms over Jacobian entries pull the activations' second derivatives
    into the weight updates; the result matches finite differences of the
    scalar loss.
    """
    spec.validate(net, targets)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tr = forward_trace(net, x, need_jacobian=spec.needs_jacobian)
    values, gy, gjac = loss_and_upstream(spec, tr.y, tr.jac, targets)
    grads, _ = vjp(tr, gy, gjac)
    return grads_to_vector(net, grads), values
