"""Activation functions with closed-form first and second derivatives.

Losses that penalize the gradient of a network output with respect to its
inputs back-propagate through the first derivative of each activation, so
the parameter updates need the second derivative as well.  Every activation
here therefore carries the full triple (A, A', A'') in closed form.  The
piecewise ones are split at z = 0; the z >= 0 branch is used at the
breakpoint itself so evaluation is total and deterministic.
"""

import numpy as np

LEAKY_SLOPE = 0.01


def _poly_z(z):
    return z, np.ones_like(z), np.zeros_like(z)


def _poly_halfz2_z(z):
    return 0.5 * z * z + z, z + 1.0, np.ones_like(z)


def _poly_z2(z):
    return z * z, 2.0 * z, np.full_like(z, 2.0)


def _poly_z4(z):
    return z ** 4, 4.0 * z ** 3, 12.0 * z * z


def _poly_z4_halfz2_z(z):
    return z ** 4 + 0.5 * z * z + z, 4.0 * z ** 3 + z + 1.0, 12.0 * z * z + 1.0


def _zero(z):
    o = np.zeros_like(z)
    return o, o.copy(), o.copy()


def _exp_minus_one(z):
    e = np.exp(z)
    return e - 1.0, e, e


def _leaky(z):
    s = LEAKY_SLOPE
    return s * z, np.full_like(z, s), np.zeros_like(z)


# tag -> (branch for z >= 0, branch for z < 0); None means single-branch.
_TABLE = {
    "linear": (_poly_z, None),
    "leaky_relu": (_poly_z, _leaky),
    "relu_z": (_poly_z, _zero),
    "relu_halfz2_z": (_poly_halfz2_z, _zero),
    "relu_z2": (_poly_z2, _zero),
    "elu_e": (_exp_minus_one, None),
    "elu_z": (_poly_z, _exp_minus_one),
    "elu_halfz2_z": (_poly_halfz2_z, _exp_minus_one),
    "elu_z2": (_poly_z2, _exp_minus_one),
    "elu_z4": (_poly_z4, _exp_minus_one),
    "elu_z4_halfz2_z": (_poly_z4_halfz2_z, _exp_minus_one),
}

ACTIVATION_TAGS = tuple(_TABLE)


def activation_eval(kind, z):
    """Evaluate (A(z), A'(z), A''(z)) for an activation tag.

    ``z`` may be a scalar or any ndarray; the three returned arrays match
    its shape.  Unknown tags raise ``KeyError``.
    """
    try:
        pos, neg = _TABLE[kind]
    except KeyError:
        raise KeyError(f"unknown activation tag {kind!r}") from None
    z = np.asarray(z, dtype=float)
    if neg is None:
        return pos(z)
    mask = z >= 0.0
    # Evaluate the exponential branch on clamped arguments so the unused
    # side never overflows; the mask discards those entries.
    a_p, d_p, h_p = pos(np.where(mask, z, 0.0))
    a_n, d_n, h_n = neg(np.where(mask, 0.0, z))
    return (
        np.where(mask, a_p, a_n),
        np.where(mask, d_p, d_n),
        np.where(mask, h_p, h_n),
    )
