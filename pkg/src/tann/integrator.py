"""Rate equations and explicit time integration of the material response.

The incremental relations follow from differentiating the two potentials
and closing the plastic multiplier with the consistency condition on the
yield surface: with the flow normal n = dy/dX,

    lambda = (n . d2F/dzde . deps_dt) / B,   B = -(n . d2F/dzdz . n),

and flow happens only when the state sits on the surface and the trial
multiplier is positive; on-surface unloading falls back to the elastic
branch.  A step under a constant strain rate is split into elastic legs,
whose yield crossing is solved in closed form, and plastic legs advanced
with the adaptive Bogacki-Shampine 2(3) pair.  Small outward drift left
by the explicit solver is removed by a radial return of the dissipative
stress, adjusting the plastic strain consistently.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .materials import MaterialState, free_energy_curvatures, potentials

RTOL = 1e-8
ATOL_STRESS_FACTOR = 1e-12
DRIFT_FACTOR = 10.0


class StateInvalidError(ValueError):
    """The starting state violates the yield constraint."""


class SingularConsistencyError(RuntimeError):
    """The consistency denominator vanished; no unique plastic rate."""


class IntegrationError(RuntimeError):
    """The explicit solver failed or left excessive yield drift."""


@dataclass
class Rates:
    """Instantaneous rates (sigma_dot, chi_dot, zeta_dot) and multiplier."""

    sigma_dot: np.ndarray
    chi_dot: np.ndarray
    zeta_dot: np.ndarray
    lam: float
    plastic: bool


def _flow_normal(m, x):
    """dy/dX at a state on the yield surface."""
    if m.dim == 1:
        return np.atleast_1d(np.sign(x) / m.k) if np.any(x) else np.array([1.0 / m.k])
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise SingularConsistencyError("flow direction undefined at X = 0")
    return x / norm


def _trial_multiplier(m, normal, eps_dot):
    f_ee, f_ez, f_zz = free_energy_curvatures(m)
    if m.dim == 1:
        b = -float(normal * f_zz * normal)
        num = float(normal * f_ez * eps_dot)
    else:
        b = -float(normal @ f_zz @ normal)
        num = float(normal @ f_ez @ eps_dot)
    if not b < 0.0:
        raise SingularConsistencyError(f"consistency denominator B={b:.3e}")
    return num / b


def incremental_rates(m, state, eps_dot):
    """Rates of (sigma, chi, zeta) under a prescribed strain rate."""
    eps_dot = np.asarray(eps_dot, dtype=float).reshape(m.dim)
    y = state.yield_value(m)
    if y > m.y_tol:
        raise StateInvalidError(f"state outside the yield surface (y={y:.3e})")
    f_ee, f_ez, f_zz = free_energy_curvatures(m)
    lam = 0.0
    zeta_dot = np.zeros(m.dim)
    plastic = False
    if y >= -m.y_tol:
        normal = _flow_normal(m, state.X)
        lam_trial = _trial_multiplier(m, normal, eps_dot)
        if lam_trial > 0.0:
            lam = lam_trial
            zeta_dot = lam * normal
            plastic = True
    if m.dim == 1:
        sigma_dot = f_ee * eps_dot + f_ez * zeta_dot
        chi_dot = -(f_ez * eps_dot + f_zz * zeta_dot)
    else:
        sigma_dot = f_ee @ eps_dot + f_ez @ zeta_dot
        chi_dot = -(f_ez @ eps_dot + f_zz @ zeta_dot)
    return Rates(sigma_dot=sigma_dot, chi_dot=chi_dot, zeta_dot=zeta_dot,
                 lam=lam, plastic=plastic)


def dissipation_rate(m, zeta_dot):
    """D at an internal-variable rate (first-order homogeneous)."""
    if m.dim == 1:
        return m.k * abs(float(zeta_dot[0]))
    zd = zeta_dot - zeta_dot.mean()
    return m.k * np.sqrt(2.0) * float(np.linalg.norm(zd))


def _dissipative_stress(m, eps, zeta):
    return np.atleast_1d(potentials(m, eps, zeta, np.zeros(m.dim))[3])


def _stress(m, eps, zeta):
    return np.atleast_1d(potentials(m, eps, zeta, np.zeros(m.dim))[2])


def _yield_value(m, eps, zeta):
    return float(potentials(m, eps, zeta, np.zeros(m.dim))[4])


def _elastic_crossing(m, eps, zeta, eps_dot, remaining):
    """Time to the next exit through y = 0 with zeta frozen, or None.

    X is affine in time along an elastic leg, so the crossing is the root
    of a linear (1D) or convex quadratic (3D) equation; only the exit root
    matters, the inside of the surface being an interval in time.
    """
    x0 = _dissipative_stress(m, eps, zeta)
    if m.dim == 1:
        v = m.E * float(eps_dot[0])
        if v == 0.0:
            return None
        target = m.k if v > 0.0 else -m.k
        s = (target - float(x0[0])) / v
    else:
        v = 2.0 * m.G * (eps_dot - eps_dot.mean())
        a = float(v @ v)
        if a == 0.0:
            return None
        b = 2.0 * float(x0 @ v)
        c = float(x0 @ x0) - 2.0 * m.k ** 2
        disc = b * b - 4.0 * a * c
        if disc <= 0.0:
            return None
        s = (-b + np.sqrt(disc)) / (2.0 * a)
    if s < 0.0 or s > remaining:
        return None
    return s


@dataclass
class StepInfo:
    """Diagnostics for one integrated increment."""

    sigma_bar: np.ndarray  # time-averaged stress over the step
    d_bar: float  # time-averaged dissipation rate over the step
    d_zeta: np.ndarray
    lam_end: float
    plastic: bool
    projected: bool


def integrate_step(m, state, d_eps, dt=1.0):
    """Advance a state by a strain increment applied at a constant rate.

    Returns ``(new_state, StepInfo)``.  The final state satisfies the
    yield constraint; drift up to ten times the yield tolerance is
    projected back, anything larger raises :class:`IntegrationError`.
    """
    d_eps = np.asarray(d_eps, dtype=float).reshape(m.dim)
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    y0 = state.yield_value(m)
    if y0 > m.y_tol:
        raise StateInvalidError(f"state outside the yield surface (y={y0:.3e})")
    eps0 = state.eps.copy()
    eps1 = eps0 + d_eps
    if not np.any(d_eps):
        new = MaterialState.from_strain(m, eps0, state.zeta, check=False)
        return new, StepInfo(sigma_bar=new.sigma.copy(), d_bar=0.0,
                             d_zeta=np.zeros(m.dim), lam_end=0.0,
                             plastic=False, projected=False)
    eps_dot = d_eps / dt
    zeta = state.zeta.copy()
    quad = np.zeros(m.dim + 1)  # time integrals of sigma and of D
    went_plastic = False
    t = 0.0
    t_end = dt
    stall_guard = 0
    atol = np.concatenate([
        np.full(m.dim, _strain_atol(m)),
        np.full(m.dim, ATOL_STRESS_FACTOR * m.k * dt),
        [ATOL_STRESS_FACTOR * m.k * dt],
    ])
    while t < t_end * (1.0 - 1e-14):
        eps_t = eps0 + eps_dot * t
        y = _yield_value(m, eps_t, zeta)
        lam_trial = 0.0
        if y >= -m.y_tol:
            normal = _flow_normal(m, _dissipative_stress(m, eps_t, zeta))
            lam_trial = _trial_multiplier(m, normal, eps_dot)
        if lam_trial > 0.0:
            zeta, quad, t = _plastic_leg(m, eps0, eps_dot, zeta, quad, t, t_end, atol)
            went_plastic = True
        else:
            s = _elastic_crossing(m, eps_t, zeta, eps_dot, t_end - t)
            seg = (t_end - t) if s is None else s
            if seg <= 1e-14 * dt:
                # pathological graze (tangent contact with zero trial rate)
                stall_guard += 1
                if stall_guard > 3:
                    raise IntegrationError("no progress near the yield surface")
                seg = min(1e-9 * dt, t_end - t)
            sig_a = _stress(m, eps_t, zeta)
            sig_b = _stress(m, eps_t + eps_dot * seg, zeta)
            quad[: m.dim] += 0.5 * (sig_a + sig_b) * seg  # exact: sigma affine in t
            t += seg
    projected = False
    y1 = _yield_value(m, eps1, zeta)
    if y1 > m.y_tol:
        if y1 > DRIFT_FACTOR * m.y_tol:
            raise IntegrationError(f"yield drift after explicit step (y={y1:.3e})")
        zeta = _radial_return(m, eps1, zeta)
        projected = True
    new = MaterialState.from_strain(m, eps1, zeta, check=False)
    rates_end = incremental_rates(m, new, eps_dot)
    new.lam = rates_end.lam
    return new, StepInfo(
        sigma_bar=quad[: m.dim] / dt,
        d_bar=float(quad[m.dim]) / dt,
        d_zeta=zeta - state.zeta,
        lam_end=rates_end.lam,
        plastic=went_plastic,
        projected=projected,
    )


def _strain_atol(m):
    stiff = m.E if m.dim == 1 else 2.0 * m.G
    return ATOL_STRESS_FACTOR * m.k / stiff


def _plastic_leg(m, eps0, eps_dot, zeta, quad, t, t_end, atol):
    """Advance through a plastic phase with the adaptive RK23 pair.

    The right-hand sides are hand-specialized per dimensionality; they are
    evaluated tens of times per leg and dominate generation cost.
    """
    dim = m.dim
    if dim == 1:
        e0, ed = float(eps0[0]), float(eps_dot[0])
        E, H, k = m.E, m.H, m.k
        lam_scale = E * k / (E + H)

        def rhs(tau, yvec):
            zt = yvec[0]
            x = E * (e0 + ed * tau - zt) - H * zt
            sgn = 1.0 if x >= 0.0 else -1.0
            lam = lam_scale * sgn * ed
            zdot = lam * sgn / k if lam > 0.0 else 0.0
            return (zdot, E * (e0 + ed * tau - zt), k * abs(zdot))

        def flow_stops(tau, yvec):
            x = E * (e0 + ed * tau - yvec[0]) - H * yvec[0]
            return lam_scale * ed * (1.0 if x >= 0.0 else -1.0)

    else:
        K, G, H, k = m.K, m.G, m.H, m.k
        ep0 = eps0.mean()
        e0 = eps0 - ep0
        epd = eps_dot.mean()
        ed = eps_dot - epd
        two_g = 2.0 * G
        lam_denom = two_g + H
        sqrt2k = np.sqrt(2.0) * k

        def rhs(tau, yvec):
            zt = yvec[:3]
            zp = zt.sum() / 3.0
            z = zt - zp
            de = e0 + ed * tau - z
            x = two_g * de - H * z
            n = x / np.sqrt(x @ x)
            lam = two_g * (n @ ed) / lam_denom
            zdot = lam * n if lam > 0.0 else np.zeros(3)
            sigma = 3.0 * K * (ep0 + epd * tau - zp) + two_g * de
            return np.concatenate([zdot, sigma, [sqrt2k * max(lam, 0.0)]])

        def flow_stops(tau, yvec):
            zt = yvec[:3]
            z = zt - zt.sum() / 3.0
            de = e0 + ed * tau - z
            x = two_g * de - H * z
            return (x @ ed) / np.sqrt(x @ x)

    flow_stops.terminal = True
    flow_stops.direction = -1.0

    sol = solve_ivp(rhs, (t, t_end), np.concatenate([zeta, quad]),
                    method="RK23", rtol=RTOL, atol=atol, events=[flow_stops])
    if not sol.success:
        raise IntegrationError(f"explicit solver failed: {sol.message}")
    return sol.y[:dim, -1].copy(), sol.y[dim:, -1].copy(), float(sol.t[-1])


def _radial_return(m, eps, zeta):
    """Project the dissipative stress radially onto y = 0, adjusting the
    plastic strain; the volumetric plastic strain is untouched."""
    x = _dissipative_stress(m, eps, zeta)
    if m.dim == 1:
        target = m.k * np.sign(x[0])
        return np.atleast_1d((m.E * eps[0] - target) / (m.E + m.H))
    target = np.sqrt(2.0) * m.k * x / np.linalg.norm(x)
    e_dev = eps - eps.mean()
    z_dev = (2.0 * m.G * e_dev - target) / (2.0 * m.G + m.H)
    return z_dev + zeta.mean()


def run_path(m, state, increments, dt=1.0):
    """Integrate a sequence of strain increments; returns the state list
    and the matching :class:`StepInfo` list."""
    states = [state]
    infos = []
    for d_eps in np.atleast_2d(np.asarray(increments, dtype=float).reshape(-1, m.dim)):
        state, info = integrate_step(m, state, d_eps, dt=dt)
        states.append(state)
        infos.append(info)
    return states, infos
