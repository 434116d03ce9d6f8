"""Strain-increment sequences used to drive models in recall mode.

The cyclic family follows sign patterns of sampled cosines/sines whose
arguments are rational multiples of pi, so the signs are computed from
integer phase arithmetic rather than floating trigonometry; the sign at
an exact zero crossing is 0.
"""

import numpy as np

PATH_KINDS = ("cyclic", "uniaxial", "biaxial", "triaxial", "random")


def _check_ratio(eps_max, d_eps):
    if d_eps <= 0.0:
        raise ValueError("d_eps must be positive")
    ratio = eps_max / d_eps
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError("eps_max must be a positive integer multiple of d_eps")
    return n


def _sign_cos(num, den):
    """sign(cos(pi * num / den)) for integers, exactly."""
    m = num % (2 * den)
    half = den  # cos vanishes at odd multiples of den/2
    if 2 * m == half or 2 * m == 3 * half:
        return 0
    return 1 if (2 * m < half or 2 * m > 3 * half) else -1


def _sign_sin(num, den):
    return _sign_cos(2 * num - den, 2 * den)


def cyclic_signs(n_steps, quarter_period, phase="cos"):
    """Sign of cos(n*pi/(2N)) or sin(n*pi/(2N)) for n = 1..n_steps."""
    fn = _sign_cos if phase == "cos" else _sign_sin
    return np.array([fn(n, 2 * quarter_period) for n in range(1, n_steps + 1)], dtype=float)


def loading_path(kind, d_eps, eps_max, n_steps=None, seed=None, dim=1):
    """Strain increments for one driving program.

    ``cyclic`` yields scalars d_eps * sign(cos(n pi / 2N)) with
    N = eps_max/d_eps; the multi-axial kinds produce 3-vectors with the
    first component cyclic and the others phase-shifted per program;
    ``random`` draws seeded zero-mean normal increments with standard
    deviation ``d_eps`` (``dim`` components per step).
    """
    if kind not in PATH_KINDS:
        raise ValueError(f"unknown path kind {kind!r}")
    if kind == "random":
        if seed is None or n_steps is None:
            raise ValueError("random paths need a seed and n_steps")
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, d_eps, size=n_steps if dim == 1 else (n_steps, dim))
    n_quarter = _check_ratio(eps_max, d_eps)
    if n_steps is None:
        n_steps = 4 * n_quarter
    c1 = d_eps * cyclic_signs(n_steps, n_quarter, "cos")
    if kind == "cyclic":
        return c1
    out = np.zeros((n_steps, 3))
    out[:, 0] = c1
    if kind == "biaxial":
        out[:, 1] = -d_eps * cyclic_signs(n_steps, 2 * n_quarter, "cos")
    elif kind == "triaxial":
        s = d_eps * cyclic_signs(n_steps, n_quarter, "sin")
        out[:, 1] = s
        out[:, 2] = s
    return out
