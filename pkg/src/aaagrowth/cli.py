"""Command-line interface: synth, fit-field, train, predict, eval, threshold.

All outputs are reproducible from (inputs, seed) and carry the seed plus a
hash of the effective configuration.  Errors are emitted as structured JSON
on stderr with exit codes: 2 invalid arguments, 3 data errors, 4 numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from . import temporal
from . import trainer as trainer_mod
from .model import GrowthModel, ModelConfig
from .surface.measure import max_diameter, region_volume
from .surface.mesh import (VascularModel, load_centerline, load_ply,
                           save_centerline, save_ply)
from .surface.metrics import hd95, rgvd
from .temporal import FitConfig, PatientTimeline, VelocityFieldNet


class DataError(Exception):
    """Unreadable/inconsistent inputs (exit code 3)."""


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _seed_from(config_seed: int) -> int:
    env = os.environ.get("GROWTH_SEED")
    return int(env) if env else int(config_seed)


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read JSON {path}: {exc}") from exc


def _load_model_snapshot(entry: dict, base: Path) -> VascularModel:
    try:
        mesh, features = load_ply(base / entry["ply"])
        centerline = load_centerline(base / entry["centerline"])
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load snapshot {entry}: {exc}") from exc
    return VascularModel(mesh=mesh, lumen_mesh=None, centerline=centerline,
                         features=features, time=float(entry["time"]))


def _load_timelines(manifest_path, fields_dir=None,
                    subset: list[str] | None = None) -> list[PatientTimeline]:
    manifest = _load_json(manifest_path)
    base = Path(manifest_path).parent
    timelines = []
    for patient in manifest.get("patients", []):
        if subset is not None and patient["id"] not in subset:
            continue
        models = [_load_model_snapshot(s, base) for s in patient["snapshots"]]
        try:
            tl = PatientTimeline(models, patient_id=patient["id"])
        except ValueError as exc:
            raise DataError(f"bad timeline {patient['id']}: {exc}") from exc
        if fields_dir is not None:
            field_path = Path(fields_dir) / f"{patient['id']}.field"
            if not field_path.exists():
                raise DataError(f"missing fitted field: {field_path}")
            tl.fitted_field = VelocityFieldNet.load(field_path)
        timelines.append(tl)
    if not timelines:
        raise DataError("manifest contains no (matching) patients")
    return timelines


def _split(manifest_path) -> tuple[list[str], list[str]]:
    manifest = _load_json(manifest_path)
    split = manifest.get("split", {})
    all_ids = [p["id"] for p in manifest.get("patients", [])]
    return (split.get("train", all_ids), split.get("holdout", []))


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec_cfg = _load_json(args.spec) if args.spec else {}
    seed = _seed_from(spec_cfg.get("seed", 0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if "patients" in spec_cfg:
        specs = [synth_mod.PatientSpec(**p) for p in spec_cfg["patients"]]
        n_holdout = 0
    else:
        n_train = spec_cfg.get("n_train", 16)
        n_holdout = spec_cfg.get("n_holdout", 4)
        train_specs, hold_specs = synth_mod.default_cohort(n_train, n_holdout, seed)
        specs = train_specs + hold_specs

    manifest = {"patients": [], "split": {"train": [], "holdout": []},
                "seed": seed, "config_hash": _config_hash(spec_cfg)}
    for i, spec in enumerate(specs):
        timeline = synth_mod.generate_patient(spec)
        pid = timeline.patient_id
        pdir = out / pid
        pdir.mkdir(exist_ok=True)
        snapshots = []
        for k, model in enumerate(timeline.models):
            ply_rel = f"{pid}/t{k}.ply"
            cl_rel = f"{pid}/t{k}.centerline.json"
            save_ply(out / ply_rel, model.mesh, features=model.features)
            save_centerline(out / cl_rel, model.centerline)
            snapshots.append({"ply": ply_rel, "centerline": cl_rel,
                              "time": model.time})
        manifest["patients"].append({"id": pid, "snapshots": snapshots})
        key = "holdout" if i >= len(specs) - n_holdout and n_holdout else "train"
        manifest["split"][key].append(pid)
    _write_json(out / "manifest.json", manifest)
    print(json.dumps({"patients": len(specs), "out": str(out), "seed": seed}))
    return 0


def cmd_fit_field(args) -> int:
    cfg_dict = _load_json(args.config) if args.config else {}
    seed = _seed_from(cfg_dict.get("seed", 0))
    cfg_dict["seed"] = seed
    config = FitConfig(**{k: v for k, v in cfg_dict.items()
                          if k in FitConfig.__dataclass_fields__})
    if "hidden" in cfg_dict:
        config = dataclasses.replace(config, hidden=tuple(cfg_dict["hidden"]))
    timelines = _load_timelines(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"seed": seed, "config_hash": _config_hash(cfg_dict), "patients": {}}
    for tl in timelines:
        net = temporal.fit(tl, config)
        net.save(out / f"{tl.patient_id}.field")
        summary["patients"][tl.patient_id] = {
            "final_loss": net.loss_log[-1], "epochs": len(net.loss_log)}
    _write_json(out / "fit_summary.json", summary)
    print(json.dumps({"fitted": len(timelines), "out": str(out), "seed": seed}))
    return 0


def cmd_train(args) -> int:
    cfg_dict = _load_json(args.config) if args.config else {}
    seed = _seed_from(cfg_dict.get("seed", 0))
    cfg_dict["seed"] = seed
    cfg = trainer_mod.TrainConfig(
        **{k: v for k, v in cfg_dict.items()
           if k in trainer_mod.TrainConfig.__dataclass_fields__})
    mc_dict = cfg_dict.get("model", {})
    mc_dict.setdefault("seed", seed)
    mc_dict.setdefault("t_min", cfg.t_min)
    mc_dict.setdefault("t_max", cfg.t_max)
    model_config = ModelConfig(**mc_dict)
    train_ids, _ = _split(args.data)
    timelines = _load_timelines(args.data, args.fields, subset=train_ids)
    gm = trainer_mod.train(timelines, cfg, model_config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    gm.save(out)
    _write_json(out.with_suffix(out.suffix + ".train.json"), {
        "seed": seed, "config_hash": _config_hash(cfg_dict),
        "loss_log": gm.loss_log})
    print(json.dumps({"out": str(out), "final_loss": gm.loss_log[-1],
                      "seed": seed}))
    return 0


def _report_against_reference(pred_model, input_model, reference) -> dict:
    ref_mesh, _ = reference
    return {
        "hd95": hd95(pred_model.mesh.vertices, ref_mesh.vertices),
        "diameter_error": abs(max_diameter(pred_model)[2]
                              - max_diameter(dataclasses.replace(
                                  pred_model, mesh=ref_mesh))[2]),
        "rgvd": rgvd(region_volume(pred_model) - region_volume(input_model),
                     region_volume(dataclasses.replace(pred_model, mesh=ref_mesh))
                     - region_volume(input_model)),
    }


def cmd_predict(args) -> int:
    gm = GrowthModel.load(args.model)
    base = Path(args.input).parent
    model = _load_model_snapshot(
        {"ply": Path(args.input).name,
         "centerline": os.path.relpath(args.centerline, base),
         "time": 0.0}, base)
    disp = gm.predict(model, args.dt)
    deformed = model.mesh.with_vertices(model.mesh.vertices + disp)
    save_ply(args.out, deformed, features=model.features)

    pred_model = dataclasses.replace(model, mesh=deformed)
    arcs, diams, dmax = max_diameter(pred_model)
    profile_path = Path(args.out).with_suffix(".diameters.csv")
    with open(profile_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arclength_mm", "diameter_mm"])
        writer.writerows(zip(arcs, diams))

    report = {"dt": args.dt, "max_diameter": dmax,
              "seed": gm.config.seed, "config_hash": _config_hash(gm.config.to_dict()),
              "mean_displacement": float(np.linalg.norm(disp, axis=1).mean())}
    if args.reference:
        try:
            ref = load_ply(args.reference)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot load reference: {exc}") from exc
        report.update(_report_against_reference(pred_model, model, ref))
    _write_json(Path(args.out).with_suffix(".report.json"), report)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    gm = GrowthModel.load(args.model) if args.predictor == "model" else None
    _, holdout_ids = _split(args.data)
    subset = holdout_ids if (args.holdout and holdout_ids) else None
    timelines = _load_timelines(args.data, args.fields, subset=subset)

    if args.predictor == "model":
        report = trainer_mod.evaluate(lambda m, d: gm.predict(m, d), timelines)
        seed = gm.config.seed
        chash = _config_hash(gm.config.to_dict())
    elif args.predictor == "zero":
        report = trainer_mod.evaluate(trainer_mod.baseline_zero, timelines)
        seed, chash = 0, _config_hash({"predictor": "zero"})
    elif args.predictor == "hist":
        report = trainer_mod.MetricsReport()
        for tl in timelines:
            sub = trainer_mod.evaluate(
                lambda m, d, tl=tl: trainer_mod.baseline_hist(tl, m.time, d), [tl])
            report.rows.extend(sub.rows)
        seed, chash = 0, _config_hash({"predictor": "hist"})
    else:  # pragma: no cover - argparse restricts choices
        raise DataError(f"unknown predictor {args.predictor}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.jsonl", "w") as fh:
        for row in report.rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    _write_json(out / "aggregate.json", {
        "aggregate": report.aggregate(), "n_cases": len(report.rows),
        "predictor": args.predictor, "seed": seed, "config_hash": chash})
    with open(out / "error_vs_dt.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dt_years", "hd95_mm", "diameter_error_mm", "rgvd"])
        for row in sorted(report.rows, key=lambda r: (r["dt"], r["patient"])):
            writer.writerow([row["dt"], row["hd95"],
                             row["diameter_error"], row["rgvd"]])
    print(json.dumps(report.aggregate(), sort_keys=True))
    return 0


def cmd_threshold(args) -> int:
    gm = GrowthModel.load(args.model)
    base = Path(args.input).parent
    model = _load_model_snapshot(
        {"ply": Path(args.input).name,
         "centerline": os.path.relpath(args.centerline, base),
         "time": 0.0}, base)
    try:
        crosses, month = trainer_mod.predict_threshold_crossing(
            gm, model, threshold=args.threshold, horizon=args.horizon)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    payload = {"crosses": crosses, "month": month, "threshold_mm": args.threshold,
               "seed": gm.config.seed,
               "config_hash": _config_hash(gm.config.to_dict())}
    print(json.dumps(payload, sort_keys=True))
    return 0


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aaagrowth",
        description="Vascular growth prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--spec", help="cohort spec JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit-field", help="fit per-patient velocity fields")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="fit config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_field)

    p = sub.add_parser("train", help="train the growth predictor")
    p.add_argument("--data", required=True, help="manifest JSON")
    p.add_argument("--fields", required=True, help="fitted-field directory")
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a deformed surface")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="input PLY")
    p.add_argument("--centerline", required=True)
    p.add_argument("--dt", type=float, required=True, help="interval (years)")
    p.add_argument("--out", required=True, help="output PLY")
    p.add_argument("--reference", help="observed target PLY for metrics")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a predictor on a cohort")
    p.add_argument("--model", help="checkpoint (for --predictor model)")
    p.add_argument("--data", required=True)
    p.add_argument("--fields", required=True)
    p.add_argument("--predictor", choices=("model", "zero", "hist"),
                   default="model")
    p.add_argument("--holdout", action="store_true",
                   help="restrict to the manifest's holdout split")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("threshold", help="predict threshold-crossing month")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--centerline", required=True)
    p.add_argument("--threshold", type=float, default=55.0)
    p.add_argument("--horizon", type=float, default=2.0)
    p.set_defaults(func=cmd_threshold)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        json.dump({"error": str(exc), "kind": "data"}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        json.dump({"error": str(exc), "kind": "numerical"}, sys.stderr)
        sys.stderr.write("\n")
        return 4
    except (OSError, KeyError, ValueError, TypeError) as exc:
        json.dump({"error": str(exc), "kind": "data"}, sys.stderr)
        sys.stderr.write("\n")
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
