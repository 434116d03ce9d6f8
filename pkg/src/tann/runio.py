"""Experiment configs, manifests, and tabular writers for the driver.

Config files are INI-style with one section per concern; every command's
outputs are accompanied by a JSON manifest snapshotting the parsed config
and seeds, which is all a byte-identical re-run needs.  No timestamps are
written anywhere for that reason.
"""

import configparser
import csv
import json
import os

from . import __version__
from .materials import MATERIAL_CASES, Model1D, Model3D
from .sampling import GenConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return {name: dict(parser[name]) for name in parser.sections()}


def _get(section, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        if cast is bool:
            return section[key].strip().lower() in ("1", "true", "yes", "on")
        return cast(section[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {section[key]!r}") from exc


def material_from_config(cfg):
    sec = cfg.get("material")
    if not sec:
        raise ConfigError("missing [material] section")
    case = sec.get("case")
    if case:
        if case not in MATERIAL_CASES:
            raise ConfigError(f"unknown material case {case!r}")
        return MATERIAL_CASES[case], case
    kind = sec.get("kind", "").lower()
    if kind == "1d":
        model = Model1D(E=_get(sec, "E", float, required=True),
                        H=_get(sec, "H", float, 0.0),
                        k=_get(sec, "k", float, required=True))
    elif kind == "3d":
        model = Model3D(K=_get(sec, "K", float, required=True),
                        G=_get(sec, "G", float, required=True),
                        k=_get(sec, "k", float, required=True),
                        H=_get(sec, "H", float, 0.0))
    else:
        raise ConfigError("material needs either case=<name> or kind=1d/3d with constants")
    return model, f"custom-{kind}"


def genconfig_from_config(cfg, seed_override=None):
    sec = cfg.get("generate", {})
    try:
        return GenConfig(
            n_samples=_get(sec, "n_samples", int, required=True),
            std_eps=_get(sec, "std_eps", float, 1e-2),
            std_zeta=_get(sec, "std_zeta", float, 1e-2),
            std_deps=_get(sec, "std_deps", float, 1e-3),
            std_sigma=_get(sec, "std_sigma", float),
            std_X=_get(sec, "std_X", float),
            dt=_get(sec, "dt", float, 1.0),
            seed=seed_override if seed_override is not None else _get(sec, "seed", int, 0),
            on_yield_fraction=_get(sec, "on_yield_fraction", float, 0.55),
            path_fraction=_get(sec, "path_fraction", float, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def trainconfig_from_config(sec, seed_override=None):
    try:
        return TrainConfig(
            learning_rate=_get(sec, "learning_rate", float, 1e-3),
            batch_size=_get(sec, "batch_size", int, 10),
            max_epochs=_get(sec, "max_epochs", int, 1000),
            patience=_get(sec, "patience", int, 100),
            seed=seed_override if seed_override is not None else _get(sec, "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def splits_from_config(sec, n):
    raw = sec.get("splits", "0.5,0.25,0.25")
    parts = [float(v) for v in raw.split(",")]
    if len(parts) != 3:
        raise ConfigError("splits must be three comma-separated numbers")
    if any(p > 1.0 for p in parts):
        return [int(p) for p in parts]
    return parts


def write_manifest(out_dir, name, command, case, seeds, config, artifacts, extra=None):
    doc = {
        "experiment": name,
        "command": command,
        "material_case": case,
        "seeds": seeds,
        "config": config,
        "artifacts": sorted(artifacts),
        "tool_version": __version__,
    }
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, f"{name}_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return path


def write_table(path, header, rows):
    """CSV with full-precision floats (repr round-trips)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def trajectory_table(traj):
    dim = traj.eps.shape[1]
    if dim == 1:
        header = ["step", "model_kind", "eps", "sigma", "zeta", "F", "D"]
    else:
        header = (["step", "model_kind"]
                  + [f"{n}_{i}" for n in ("eps", "sigma", "zeta") for i in (1, 2, 3)]
                  + ["F", "D"])
    rows = []
    for i in range(len(traj)):
        row = [i, traj.kind]
        for name in ("eps", "sigma", "zeta"):
            row.extend(float(v) for v in getattr(traj, name)[i])
        row.extend([float(traj.f[i]), float(traj.d[i])])
        rows.append(row)
    return header, rows


def write_trajectory(path, traj):
    header, rows = trajectory_table(traj)
    write_table(path, header, rows)
