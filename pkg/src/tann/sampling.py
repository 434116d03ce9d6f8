"""Random-state training data for the material models.

Each record starts from an admissible random state and applies one random
strain increment through the explicit integrator.  States are drawn from
zero-mean normals; a configured fraction of draws is projected radially
onto the yield surface (plastic flow only ever starts there, so rejection
alone would never produce on-surface states), the rest are kept only when
they fall inside.  Every sample carries the integrated targets: increment
of plastic strain and stress, the updated stored energy, and the step's
dissipation rate evaluated at the backward-difference rate d_zeta/dt,
which is non-negative by construction.

Per-sample RNG streams are derived from (seed, index), so generation is
order-independent and reproducible.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegrationError, integrate_step
from .materials import MaterialState, potentials
from .paths import loading_path

MAX_DRAWS = 1_000_000
_PATH_STREAM = 0x7FFFFFFF  # keeps path-driven streams apart from per-sample ones


class SamplingError(RuntimeError):
    pass


@dataclass
class GenConfig:
    n_samples: int
    std_eps: float = 1e-2
    std_zeta: float = 1e-2
    std_deps: float = 1e-3
    std_sigma: float | None = None  # reported scale, not a draw parameter
    std_X: float | None = None
    dt: float = 1.0
    seed: int = 0
    on_yield_fraction: float = 0.55
    path_fraction: float = 0.0  # share of samples taken from cyclic paths (3D)

    def __post_init__(self):
        if self.n_samples < 0:
            raise ValueError("n_samples must be non-negative")
        for name in ("std_eps", "std_zeta", "std_deps"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.on_yield_fraction <= 1.0:
            raise ValueError("on_yield_fraction must be in [0, 1]")
        if not 0.0 <= self.path_fraction < 1.0:
            raise ValueError("path_fraction must be in [0, 1)")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")


@dataclass
class Dataset:
    """Columnar sample store; vector fields are (n, dim)."""

    dim: int
    eps_t: np.ndarray
    d_eps: np.ndarray
    sigma_t: np.ndarray
    zeta_t: np.ndarray
    d_zeta: np.ndarray
    d_sigma: np.ndarray
    f_next: np.ndarray
    d_next: np.ndarray
    on_yield: np.ndarray
    sigma_bar: np.ndarray | None = None  # diagnostics, not serialized
    f_t: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.eps_t.shape[0]

    @property
    def on_yield_fraction(self):
        return float(self.on_yield.mean()) if len(self) else 0.0

    def subset(self, idx):
        take = lambda a: None if a is None else a[idx]
        return Dataset(self.dim, *(take(getattr(self, f)) for f in _FIELDS),
                       sigma_bar=take(self.sigma_bar), f_t=take(self.f_t),
                       meta=dict(self.meta))


_FIELDS = ("eps_t", "d_eps", "sigma_t", "zeta_t", "d_zeta", "d_sigma",
           "f_next", "d_next", "on_yield")
_VECTOR_FIELDS = ("eps_t", "d_eps", "sigma_t", "zeta_t", "d_zeta", "d_sigma")


def _put_on_yield(m, eps, zeta):
    """Radially project the dissipative stress onto y = 0, adjusting the
    plastic strain and keeping its volumetric part."""
    x = np.atleast_1d(potentials(m, eps, zeta, np.zeros(m.dim))[3])
    if m.dim == 1:
        direction = np.sign(x[0]) or 1.0
        return np.atleast_1d((m.E * eps[0] - direction * m.k) / (m.E + m.H))
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return None  # no radial direction, caller redraws
    target = np.sqrt(2.0) * m.k * x / norm
    e_dev = eps - eps.mean()
    return (2.0 * m.G * e_dev - target) / (2.0 * m.G + m.H) + zeta.mean()


def sample_initial_state(m, cfg, rng, on_yield_fraction=None):
    """Draw one admissible state and its strain increment.

    Returns ``(MaterialState, d_eps, projected)`` where ``projected``
    flags draws placed on the yield surface.  ``on_yield_fraction``
    overrides the configured projection probability (used to compensate
    for path-derived records in mixed datasets).
    """
    if on_yield_fraction is None:
        on_yield_fraction = cfg.on_yield_fraction
    projected = rng.uniform() < on_yield_fraction
    for _ in range(MAX_DRAWS):
        eps = rng.normal(0.0, cfg.std_eps, m.dim)
        zeta = rng.normal(0.0, cfg.std_zeta, m.dim)
        if projected:
            zeta = _put_on_yield(m, eps, zeta)
            if zeta is None:
                continue
            break
        y = float(potentials(m, eps, zeta, np.zeros(m.dim))[4])
        if y <= m.y_tol:
            break
    else:
        raise SamplingError(f"no admissible state after {MAX_DRAWS} draws")
    d_eps = rng.normal(0.0, cfg.std_deps, m.dim)
    return MaterialState.from_strain(m, eps, zeta), d_eps, projected


def _record(m, state, d_eps, dt):
    new, info = integrate_step(m, state, d_eps, dt=dt)
    f_next = potentials(m, new.eps, new.zeta, np.zeros(m.dim))[0]
    y0 = state.yield_value(m)
    return {
        "eps_t": state.eps, "d_eps": np.asarray(d_eps, dtype=float).reshape(m.dim),
        "sigma_t": state.sigma, "zeta_t": state.zeta,
        "d_zeta": info.d_zeta, "d_sigma": new.sigma - state.sigma,
        "f_next": float(f_next), "d_next": info.d_bar,
        "on_yield": abs(y0) <= m.y_tol,
        "sigma_bar": info.sigma_bar, "f_t": state.free_energy(m),
    }, new


def generate_dataset(m, cfg):
    """Generate ``cfg.n_samples`` records for a material model.

    A ``path_fraction`` share of the records is taken from random-amplitude
    uni/bi-axial cyclic paths instead of independent random states (3D
    models only), mirroring how recall-mode inputs are distributed.  The
    random part's projection probability is rebalanced against the path
    records so the dataset-level on-yield share still tracks
    ``cfg.on_yield_fraction``.
    """
    n_path = int(round(cfg.n_samples * cfg.path_fraction)) if m.dim == 3 else 0
    n_random = cfg.n_samples - n_path
    path_rows = _path_records(m, cfg, n_path) if n_path else []
    project_p = cfg.on_yield_fraction
    if n_path and n_random:
        n_on_path = sum(r["on_yield"] for r in path_rows)
        project_p = (cfg.on_yield_fraction * cfg.n_samples - n_on_path) / n_random
        project_p = min(max(project_p, 0.0), 1.0)
    rows = []
    skipped = 0
    for i in range(n_random):
        rng = np.random.default_rng([cfg.seed, i])
        for _ in range(100):
            state, d_eps, _ = sample_initial_state(m, cfg, rng, on_yield_fraction=project_p)
            try:
                row, _ = _record(m, state, d_eps, cfg.dt)
            except IntegrationError:
                skipped += 1
                continue
            rows.append(row)
            break
        else:
            raise SamplingError(f"sample {i}: integrator kept failing")
    rows.extend(path_rows)
    ds = _collect(m.dim, rows)
    ds.meta = {"seed": cfg.seed, "n_samples": cfg.n_samples, "skipped": skipped,
               "dt": cfg.dt, "on_yield_fraction": ds.on_yield_fraction}
    return ds


def _path_records(m, cfg, n_needed):
    rows = []
    path_idx = 0
    while len(rows) < n_needed:
        rng = np.random.default_rng([cfg.seed, _PATH_STREAM, path_idx])
        kind = "uniaxial" if path_idx % 2 == 0 else "biaxial"
        d_eps = 10.0 ** rng.uniform(np.log10(2e-4), np.log10(2e-3))
        quarter = int(rng.integers(10, 31))
        incs = loading_path(kind, d_eps, quarter * d_eps, n_steps=4 * quarter)
        state = MaterialState.origin(m)
        for inc in incs:
            if len(rows) >= n_needed:
                break
            try:
                row, state = _record(m, state, inc, cfg.dt)
            except IntegrationError:
                break
            rows.append(row)
        path_idx += 1
    return rows


def _collect(dim, rows):
    def stack(key):
        return np.array([r[key] for r in rows], dtype=float).reshape(len(rows), -1)

    return Dataset(
        dim=dim,
        eps_t=stack("eps_t"), d_eps=stack("d_eps"), sigma_t=stack("sigma_t"),
        zeta_t=stack("zeta_t"), d_zeta=stack("d_zeta"), d_sigma=stack("d_sigma"),
        f_next=stack("f_next")[:, 0], d_next=stack("d_next")[:, 0],
        on_yield=np.array([r["on_yield"] for r in rows], dtype=bool),
        sigma_bar=stack("sigma_bar"), f_t=stack("f_t")[:, 0],
    )


def split_indices(n, counts, seed):
    """Shuffle 0..n-1 and cut into train/val/test index arrays.

    ``counts`` may be absolute sizes or fractions summing to at most 1.
    """
    counts = list(counts)
    if len(counts) != 3:
        raise ValueError("need (train, val, test) counts")
    if all(0.0 < c <= 1.0 for c in counts):
        counts = [int(round(c * n)) for c in counts]
        counts[2] = min(counts[2], n - counts[0] - counts[1])
    if sum(counts) > n:
        raise ValueError("split counts exceed dataset size")
    perm = np.random.default_rng(seed).permutation(n)
    a, b, c = counts
    return {"train": np.sort(perm[:a]),
            "val": np.sort(perm[a : a + b]),
            "test": np.sort(perm[a + b : a + b + c])}


# ---------------------------------------------------------------------------
# CSV schema: vector columns carry _1.._3 suffixes in 3D


def _columns(dim):
    cols = []
    for name in _FIELDS[:-3]:
        if dim == 1:
            cols.append(name)
        else:
            cols.extend(f"{name}_{i + 1}" for i in range(dim))
    cols.extend(["F_next", "D_next", "on_yield"])
    return cols


def dataset_to_csv(ds, path_or_buf):
    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(_columns(ds.dim))
        for i in range(len(ds)):
            row = []
            for name in _VECTOR_FIELDS:
                row.extend(repr(float(v)) for v in getattr(ds, name)[i])
            row.append(repr(float(ds.f_next[i])))
            row.append(repr(float(ds.d_next[i])))
            row.append(int(ds.on_yield[i]))
            writer.writerow(row)

    if isinstance(path_or_buf, (str,)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w", newline="", encoding="utf-8") as fh:
            write(fh)
    else:
        write(path_or_buf)


def dataset_from_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = [row for row in reader if row]
    dim = 3 if "eps_t_1" in header else 1
    if header != _columns(dim):
        raise ValueError("unexpected dataset header")
    data = np.array([[float(v) for v in row] for row in body], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    k = 0
    fields = {}
    for name in _VECTOR_FIELDS:
        fields[name] = data[:, k : k + dim]
        k += dim
    return Dataset(dim=dim, **fields, f_next=data[:, k], d_next=data[:, k + 1],
                   on_yield=data[:, k + 2].astype(bool))


def dataset_csv_bytes(ds):
    buf = io.StringIO()
    dataset_to_csv(ds, buf)
    return buf.getvalue().encode()
