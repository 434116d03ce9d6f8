"""Experiment driver: datasets, training, recall, and comparison studies.

Every command is a pure function of (config, seed): outputs are CSV
tables plus JSON manifests that snapshot the parsed config, and no
timestamps or environment state are written, so a manifest is enough to
reproduce a run byte for byte.  Figures are rendered next to each table
unless --no-figures is given.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import baseline as bl
from . import figures
from . import tann_model as tm
from .integrator import IntegrationError, run_path
from .materials import MATERIAL_CASES, MaterialState, lookup_case
from .optimizer import NonFiniteGradient
from .paths import loading_path
from .runio import (ConfigError, genconfig_from_config, load_config,
                    material_from_config, splits_from_config,
                    trainconfig_from_config, write_manifest, write_table,
                    write_trajectory)
from .sampling import SamplingError, dataset_from_csv, dataset_to_csv, generate_dataset, split_indices
from .study import STUDY_ACTIVATIONS, run_activation_study
from .tann_model import Trajectory
from .training import TrainingError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _run_name(cfg, args, default):
    return cfg.get("run", {}).get("id") or default


def _out_dir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def cmd_generate(args):
    cfg = load_config(args.config)
    model, case = material_from_config(cfg)
    gen = genconfig_from_config(cfg, seed_override=args.seed)
    out = _out_dir(args)
    name = _run_name(cfg, args, f"generate_{case}")
    ds = generate_dataset(model, gen)
    data_path = os.path.join(out, f"{name}_dataset.csv")
    dataset_to_csv(ds, data_path)
    counts = splits_from_config(cfg.get("generate", {}), len(ds))
    splits = split_indices(len(ds), counts, seed=gen.seed)
    splits_path = os.path.join(out, f"{name}_splits.json")
    with open(splits_path, "w", encoding="utf-8") as fh:
        json.dump({k: v.tolist() for k, v in splits.items()}, fh)
    artifacts = [data_path, splits_path]
    if not args.no_figures:
        artifacts.append(figures.plot_dataset(ds, os.path.join(out, f"{name}_dataset.png"),
                                              k=model.k))
    write_manifest(out, name, "generate", case, {"generate": gen.seed}, cfg, artifacts,
                   extra={"on_yield_fraction": ds.on_yield_fraction,
                          "skipped_records": ds.meta.get("skipped", 0)})
    print(f"wrote {data_path} ({len(ds)} records)")
    print(f"on-yield fraction: {ds.on_yield_fraction:.4f}")
    return EXIT_OK


def _parse_hidden(text):
    return tuple(int(v) for v in str(text).split(",") if str(v).strip())


def cmd_train(args):
    cfg = load_config(args.config)
    model_mat, case = material_from_config(cfg)
    sec = cfg.get("train", {})
    kind = sec.get("kind", "tann").lower()
    if kind not in ("tann", "ann"):
        raise ConfigError(f"train kind must be tann or ann, got {kind!r}")
    dataset_path = sec.get("dataset")
    if not dataset_path or not os.path.exists(dataset_path):
        raise ConfigError(f"train dataset not found: {dataset_path!r}")
    ds = dataset_from_csv(dataset_path)
    tc = trainconfig_from_config(sec, seed_override=args.seed)
    splits_path = sec.get("splits_file")
    if splits_path:
        with open(splits_path, encoding="utf-8") as fh:
            splits = {k: np.asarray(v, dtype=int) for k, v in json.load(fh).items()}
    else:
        counts = splits_from_config(sec, len(ds))
        splits = split_indices(len(ds), counts, seed=int(sec.get("split_seed", tc.seed)))
    out = _out_dir(args)
    name = _run_name(cfg, args, f"train_{kind}_{case}")
    init_seed = int(sec.get("init_seed", tc.seed))
    if kind == "tann":
        hidden_z = _parse_hidden(sec["hidden_zeta"]) if "hidden_zeta" in sec else None
        hidden_f = _parse_hidden(sec["hidden_f"]) if "hidden_f" in sec else None
        model = tm.build_tann(ds, splits["train"], seed=init_seed,
                              hidden_zeta=hidden_z, hidden_f=hidden_f)
        model, history = tm.tann_train(model, ds, splits, tc)
        bundle = os.path.join(out, f"{name}_model")
        tm.save_bundle(model, bundle, meta={"material_case": case,
                                            "seeds": {"init": init_seed, "train": tc.seed},
                                            "dataset": dataset_path,
                                            "normalization": "train-split z-score inputs, scale-only outputs"})
    else:
        hidden = _parse_hidden(sec["hidden"]) if "hidden" in sec else None
        model = bl.build_baseline(ds, splits["train"], seed=init_seed, hidden=hidden)
        model, history = bl.ann_train(model, ds, splits, tc)
        bundle = os.path.join(out, f"{name}_model")
        bl.save_bundle(model, bundle, meta={"material_case": case,
                                            "seeds": {"init": init_seed, "train": tc.seed},
                                            "dataset": dataset_path,
                                            "normalization": "train-split z-score inputs, scale-only outputs"})
    hist_path = os.path.join(out, f"{name}_history.csv")
    history.save_csv(hist_path)
    artifacts = [bundle, hist_path]
    if not args.no_figures:
        artifacts.append(figures.plot_history(history, os.path.join(out, f"{name}_history.png"),
                                              title=f"{kind} {case}"))
    extra = {"n_parameters": model.n_parameters(), "best_epoch": history.best_epoch}
    print(f"trained {kind} on {case}: {model.n_parameters()} trainable parameters, "
          f"best epoch {history.best_epoch}")
    if kind == "ann":
        paired = tm.build_tann(ds, splits["train"], seed=init_seed)
        parity = bl.parameter_parity(paired, model)
        extra["parameter_parity"] = parity
        print(f"parameter parity vs paired tann: {parity['ann']} vs {parity['tann']} "
              f"(ratio {parity['ratio']:.3f}, within 5%: {parity['within_5_percent']})")
    write_manifest(out, name, "train", case,
                   {"train": tc.seed, "init": init_seed}, cfg, artifacts, extra=extra)
    return EXIT_OK


def load_model_bundle(dirpath):
    meta_path = os.path.join(dirpath, "meta.json")
    if not os.path.exists(meta_path):
        raise ConfigError(f"no model bundle at {dirpath}")
    with open(meta_path, encoding="utf-8") as fh:
        kind = json.load(fh).get("kind")
    if kind == "tann":
        return tm.load_bundle(dirpath)
    if kind == "ann":
        return bl.load_bundle(dirpath)
    raise ConfigError(f"unknown bundle kind {kind!r} in {dirpath}")


def _path_from_section(sec, dim, seed_override=None):
    kind = sec.get("kind", "cyclic")
    d_eps = float(sec.get("d_eps", 1e-4))
    eps_max = float(sec.get("eps_max", 2e-3))
    n_steps = int(sec["n_steps"]) if "n_steps" in sec else None
    seed = seed_override if seed_override is not None else int(sec.get("seed", 0))
    path = loading_path(kind, d_eps, eps_max, n_steps=n_steps, seed=seed, dim=dim)
    if dim == 3 and path.ndim == 1:
        raise ConfigError(f"path kind {kind!r} is one-dimensional but the model is 3D")
    if dim == 1 and path.ndim > 1:
        raise ConfigError(f"path kind {kind!r} is three-dimensional but the model is 1D")
    return path, {"kind": kind, "d_eps": d_eps, "eps_max": eps_max,
                  "n_steps": n_steps, "seed": seed}


def reference_trajectory(material, path, dt=1.0):
    states, infos = run_path(material, MaterialState.origin(material), path, dt=dt)
    dim = material.dim
    traj = Trajectory(kind="reference",
                      eps=np.array([s.eps for s in states]),
                      sigma=np.array([s.sigma for s in states]),
                      zeta=np.array([s.zeta for s in states]),
                      f=np.array([s.free_energy(material) for s in states]),
                      d=np.array([0.0] + [i.d_bar for i in infos]))
    return traj


def cmd_recall(args):
    cfg = load_config(args.config)
    model, meta = load_model_bundle(args.model)
    case = meta.get("material_case")
    material = lookup_case(case) if case in MATERIAL_CASES else None
    if material is None and "material" in cfg:
        material, case = material_from_config(cfg)
    sec = cfg.get("recall", {})
    dim = model.dim
    path, path_spec = _path_from_section(sec, dim, seed_override=args.seed)
    out = _out_dir(args)
    name = _run_name(cfg, args, f"recall_{case}")
    if material is not None:
        initial = MaterialState.origin(material)
        ref = reference_trajectory(material, path, dt=model.dt)
    else:
        zeros = np.zeros(dim)
        initial = MaterialState(eps=zeros, zeta=zeros.copy(), sigma=zeros.copy(), X=zeros.copy())
        ref = None
    provenance = {"model": args.model, "path": path_spec, "case": case}
    if meta.get("kind") == "tann":
        traj = tm.recall(model, initial, path, provenance=provenance)
    else:
        if material is None:
            raise ConfigError("baseline recall needs a material for reconstruction")
        traj = bl.recall_baseline(model, initial, path, provenance=provenance)
        bl.attach_thermo(material, traj, dt=model.dt)
    traj_path = os.path.join(out, f"{name}_trajectory.csv")
    write_trajectory(traj_path, traj)
    tol = float(sec.get("tol_d", 0.0))
    if tol <= 0.0:
        base = ref.d if ref is not None else np.abs(traj.d)
        tol = 1e-3 * float(np.max(base)) if np.max(base, initial=0.0) > 0 else 1e-9
    report = tm.consistency_check(traj, tol)
    report_path = os.path.join(out, f"{name}_consistency.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"min_D": report.min_d, "n_violations": report.n_violations,
                   "violation_steps": report.violation_steps,
                   "max_two_route_sigma_gap": report.max_route_gap,
                   "tolerance": tol, "passed": report.passed,
                   "truncated_at": traj.truncated_at}, fh, indent=1, sort_keys=True)
    artifacts = [traj_path, report_path]
    if not args.no_figures:
        artifacts.append(figures.plot_trajectory(
            traj, os.path.join(out, f"{name}_trajectory.png"), reference=ref,
            title=f"{meta.get('kind')} {case} {path_spec['kind']}"))
    write_manifest(out, name, "recall", case, {"path": path_spec["seed"]}, cfg, artifacts,
                   extra={"consistency": {"min_D": report.min_d,
                                          "n_violations": report.n_violations,
                                          "passed": report.passed}})
    print(f"trajectory of {len(traj)} states -> {traj_path}")
    print(f"min D = {report.min_d:.6g}, violations below -{tol:.3g}: {report.n_violations}")
    return EXIT_OK


def cmd_study(args):
    cfg = load_config(args.config)
    sec = cfg.get("study", {})
    acts = sec.get("activations", "all")
    activations = STUDY_ACTIVATIONS if acts.strip().lower() == "all" else \
        tuple(a.strip() for a in acts.split(",") if a.strip())
    tc = trainconfig_from_config(sec, seed_override=args.seed)
    tc_kwargs = {"learning_rate": float(sec.get("learning_rate", 1e-5)),
                 "batch_size": tc.batch_size, "max_epochs": tc.max_epochs,
                 "patience": tc.patience, "seed": tc.seed}
    out = _out_dir(args)
    name = _run_name(cfg, args, "study_activations")
    rows = run_activation_study(activations, **tc_kwargs)
    table_path = os.path.join(out, f"{name}.csv")
    write_table(table_path,
                ["activation", "loss_total", "loss_output", "loss_gradient", "epochs"],
                [[r.activation, r.loss_total, r.loss_output, r.loss_gradient, r.epochs]
                 for r in rows])
    artifacts = [table_path]
    if not args.no_figures:
        artifacts.append(figures.plot_study(rows, os.path.join(out, f"{name}.png")))
    write_manifest(out, name, "study-activations", "-", {"study": tc_kwargs["seed"]},
                   cfg, artifacts)
    for r in rows:
        print(f"{r.activation:18s} total={r.loss_total:.4e} value={r.loss_output:.4e} "
              f"gradient={r.loss_gradient:.4e} epochs={r.epochs}")
    return EXIT_OK


def sweep_rows(tann_bundle, ann_bundle, material, d_eps_grid, quarter=20, cycles=2, dt=1.0):
    """Cyclic-path comparison of both models against the integrator."""
    tann, _ = tann_bundle
    ann, _ = ann_bundle
    dim = tann.dim
    kind = "cyclic" if dim == 1 else "uniaxial"
    rows = []
    for d_eps in d_eps_grid:
        path = loading_path(kind, d_eps, quarter * d_eps, n_steps=4 * quarter * cycles)
        ref = reference_trajectory(material, path, dt=dt)
        initial = MaterialState.origin(material)
        traj_t = tm.recall(tann, initial, path)
        traj_a = bl.attach_thermo(material, bl.recall_baseline(ann, initial, path), dt=dt)
        for traj, model_kind in ((traj_t, "tann"), (traj_a, "ann")):
            n = len(traj)
            rows.append({
                "d_eps": d_eps,
                "model_kind": model_kind,
                "stress_rmse": float(np.sqrt(np.mean((traj.sigma - ref.sigma[:n]) ** 2))),
                "zeta_rmse": float(np.sqrt(np.mean((traj.zeta - ref.zeta[:n]) ** 2))),
                "f_rmse": float(np.sqrt(np.mean((traj.f - ref.f[:n]) ** 2))),
                "min_d": float(np.min(traj.d)),
                "n_d_negative": int(np.sum(traj.d < 0.0)),
                "truncated_at": traj.truncated_at if traj.truncated_at is not None else "",
            })
    return rows


def cmd_compare(args):
    cfg = load_config(args.config)
    tann_bundle = load_model_bundle(args.tann)
    ann_bundle = load_model_bundle(args.ann)
    if tann_bundle[1].get("kind") != "tann" or ann_bundle[1].get("kind") != "ann":
        raise ConfigError("--tann and --ann must point at bundles of those kinds")
    case = tann_bundle[1].get("material_case")
    if case not in MATERIAL_CASES:
        raise ConfigError(f"bundle names unknown material case {case!r}")
    material = lookup_case(case)
    sec = cfg.get("compare", {})
    grid = [float(v) for v in sec.get("d_eps_grid", "1e-5,1e-4,1e-3,1e-2,1e-1,1").split(",")]
    quarter = int(sec.get("quarter_steps", 20))
    cycles = int(sec.get("cycles", 2))
    out = _out_dir(args)
    name = _run_name(cfg, args, f"compare_{case}")
    rows = sweep_rows(tann_bundle, ann_bundle, material, grid, quarter=quarter, cycles=cycles,
                      dt=tann_bundle[0].dt)
    table_path = os.path.join(out, f"{name}.csv")
    header = ["d_eps", "model_kind", "stress_rmse", "zeta_rmse", "f_rmse",
              "min_d", "n_d_negative", "truncated_at"]
    write_table(table_path, header, [[r[h] for h in header] for r in rows])
    artifacts = [table_path]
    if not args.no_figures:
        artifacts.append(figures.plot_sweep(rows, os.path.join(out, f"{name}.png"),
                                            k=material.k))
    write_manifest(out, name, "compare", case, {}, cfg, artifacts,
                   extra={"tann_bundle": args.tann, "ann_bundle": args.ann})
    for r in rows:
        print(f"d_eps={r['d_eps']:.0e} {r['model_kind']:4s} stress_rmse={r['stress_rmse']:.4e} "
              f"min_D={r['min_d']:.4e} negatives={r['n_d_negative']}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="tann",
                                     description="Thermodynamics-aware constitutive model driver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    common(sub.add_parser("generate", help="sample a training dataset"))
    common(sub.add_parser("train", help="train a model on a dataset"))
    p = sub.add_parser("recall", help="drive a trained model along a loading path")
    common(p)
    p.add_argument("--model", required=True, help="model bundle directory")
    common(sub.add_parser("study-activations", help="activation benchmark table"))
    p = sub.add_parser("compare", help="sweep both model kinds over strain increments")
    common(p)
    p.add_argument("--tann", required=True, help="tann bundle directory")
    p.add_argument("--ann", required=True, help="baseline bundle directory")
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "recall": cmd_recall,
    "study-activations": cmd_study,
    "compare": cmd_compare,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, IntegrationError, SamplingError, NonFiniteGradient,
            tm.InconsistentDataError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
