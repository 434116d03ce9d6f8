"""Analytic elasto-plastic material models built from two potentials.

Each model is defined by a stored-energy density F and a dissipation rate
D that is first-order homogeneous in the internal-variable rate, with the
yield function arising as the degenerate Legendre transform of D.  The
1D model is a spring-slider with linear kinematic hardening; the 3D model
is von Mises plasticity in principal axes with kinematic hardening.  Both
work in SI units with energies per unit volume.

The dissipative stress equals the strain-gradient conjugate force
(orthogonality): 1D X = sigma - H*zeta; 3D X = 2G(e - z) - H*z on the
deviator, whose volumetric conjugate never enters the yield function.
"""

from dataclasses import dataclass

import numpy as np

YIELD_TOL_FACTOR = 1e-8

_ONES3 = np.ones((3, 3)) / 3.0  # volumetric projector (as applied to 3-vectors)
_PDEV3 = np.eye(3) - _ONES3


@dataclass(frozen=True)
class Model1D:
    """Spring-slider: elastic modulus E, kinematic modulus H, strength k."""

    E: float
    H: float
    k: float

    def __post_init__(self):
        if not (self.E > 0.0 and self.k > 0.0):
            raise ValueError("E and k must be positive")
        if not self.E + self.H > 0.0:
            raise ValueError("E + H must be positive")

    dim = 1

    @property
    def y_tol(self):
        # y = |X|/k - 1 is dimensionless; this keeps |X| within 1e-8*k.
        return YIELD_TOL_FACTOR


@dataclass(frozen=True)
class Model3D:
    """Von Mises in principal axes: bulk K, shear G, shear strength k,
    kinematic modulus H."""

    K: float
    G: float
    k: float
    H: float

    def __post_init__(self):
        if not (self.K > 0.0 and self.G > 0.0 and self.k > 0.0):
            raise ValueError("K, G and k must be positive")
        if not 2.0 * self.G + self.H > 0.0:
            raise ValueError("2G + H must be positive")

    dim = 3

    @property
    def y_tol(self):
        return YIELD_TOL_FACTOR * self.k


#: steel-like parameter sets used throughout the studies
MATERIAL_CASES = {
    "1D-1": Model1D(E=200e9, H=0.0, k=200e6),
    "1D-2": Model1D(E=200e9, H=10e9, k=200e6),
    "1D-3": Model1D(E=200e9, H=-10e9, k=200e6),
    "3D-1": Model3D(K=167e9, G=77e9, k=140e6, H=0.0),
    "3D-2": Model3D(K=167e9, G=77e9, k=140e6, H=10e9),
    "3D-3": Model3D(K=167e9, G=77e9, k=140e6, H=-10e9),
}


def lookup_case(name):
    try:
        return MATERIAL_CASES[name]
    except KeyError:
        raise KeyError(f"unknown material case {name!r}; "
                       f"known: {sorted(MATERIAL_CASES)}") from None


def potentials_1d(m, eps, zeta, zeta_dot):
    """Evaluate (F, D, sigma, chi, y); broadcasts over array inputs."""
    eps = np.asarray(eps, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    zeta_dot = np.asarray(zeta_dot, dtype=float)
    elastic = eps - zeta
    f = 0.5 * m.E * elastic * elastic + 0.5 * m.H * zeta * zeta
    sigma = m.E * elastic
    chi = sigma - m.H * zeta
    d = m.k * np.abs(zeta_dot)
    y = np.abs(chi) / m.k - 1.0
    return f, d, sigma, chi, y


def _vol_dev(v):
    v = np.asarray(v, dtype=float)
    mean = v.mean(axis=-1, keepdims=True)
    return mean[..., 0], v - mean


def potentials_3d(m, eps, zeta, zeta_dot):
    """Evaluate (F, D, sigma, X_dev, y) on principal 3-vectors.

    Inputs broadcast over leading axes; the last axis holds the three
    principal components.
    """
    eps_p, e = _vol_dev(eps)
    zeta_p, z = _vol_dev(zeta)
    _, z_dot = _vol_dev(zeta_dot)
    de = e - z
    f = (4.5 * m.K * (eps_p - zeta_p) ** 2
         + m.G * np.sum(de * de, axis=-1)
         + 0.5 * m.H * np.sum(z * z, axis=-1))
    sigma = 3.0 * m.K * (eps_p - zeta_p)[..., None] + 2.0 * m.G * de
    x_dev = 2.0 * m.G * de - m.H * z
    d = m.k * np.sqrt(2.0) * np.sqrt(np.sum(z_dot * z_dot, axis=-1))
    y = np.sqrt(np.sum(x_dev * x_dev, axis=-1)) - np.sqrt(2.0) * m.k
    return f, d, sigma, x_dev, y


def potentials(m, eps, zeta, zeta_dot):
    if m.dim == 1:
        return potentials_1d(m, eps, zeta, zeta_dot)
    return potentials_3d(m, eps, zeta, zeta_dot)


def free_energy_curvatures(m):
    """Second derivatives of F: (d2F/de2, d2F/dedz, d2F/dz2).

    Scalars for the 1D model, 3x3 matrices on principal components for
    the 3D one.
    """
    if m.dim == 1:
        return m.E, -m.E, m.E + m.H
    f_ee = 3.0 * m.K * _ONES3 + 2.0 * m.G * _PDEV3
    f_ez = -f_ee
    f_zz = 3.0 * m.K * _ONES3 + (2.0 * m.G + m.H) * _PDEV3
    return f_ee, f_ez, f_zz


@dataclass
class MaterialState:
    """One admissible material point: strain, plastic strain, and the
    stresses they induce.  ``lam`` is the plastic multiplier rate at this
    instant (zero when elastic)."""

    eps: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    X: np.ndarray
    lam: float = 0.0

    @classmethod
    def from_strain(cls, m, eps, zeta, lam=0.0, check=True):
        eps = np.asarray(eps, dtype=float).reshape(m.dim).copy()
        zeta = np.asarray(zeta, dtype=float).reshape(m.dim).copy()
        _, _, sigma, x, y = potentials(m, eps, zeta, np.zeros(m.dim))
        if check and y > m.y_tol:
            raise ValueError(f"state outside the yield surface (y={float(y):.3e})")
        return cls(eps=eps, zeta=zeta, sigma=np.atleast_1d(sigma),
                   X=np.atleast_1d(x), lam=lam)

    @classmethod
    def origin(cls, m):
        z = np.zeros(m.dim)
        return cls.from_strain(m, z, z)

    def yield_value(self, m):
        return float(potentials(m, self.eps, self.zeta, np.zeros(m.dim))[4])

    def free_energy(self, m):
        return float(potentials(m, self.eps, self.zeta, np.zeros(m.dim))[0])
