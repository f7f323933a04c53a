"""Command-line front end: dataset synthesis, model fitting, estimation, sweeps.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O failure.
All analysis output is serialized with 9 significant digits and no
timestamps, so reruns with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import ait, wavefield
from .calibration import load_emf, save_emf
from .errors import (
    ArgError,
    DegenerateDataError,
    DomainError,
    GridError,
    IngestError,
    MmadoaError,
    PlanError,
    SchemaError,
    SingularityError,
)
from .estimator import MlDoaEstimator, SearchConfig
from .simulate import (
    AitParams,
    ExperimentConfig,
    SweepKind,
    WmParams,
    build_model,
    rmse,
    run_sweep,
    synth_snapshots,
    transformation_error_sweep,
)
from .ula import Axis, VirtualUlaConfig, steering_matrix

USAGE_ERRORS = (ArgError, PlanError, DomainError, SchemaError, GridError)
NUMERIC_ERRORS = (SingularityError, DegenerateDataError)
IO_ERRORS = (IngestError, OSError)


def _fmt(x) -> str:
    return format(float(x), ".9g")


def _steering_condition(ula: VirtualUlaConfig, angles) -> float:
    sv = np.linalg.svd(steering_matrix(ula, angles), compute_uv=False)
    return float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else float("inf")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    ds = wavefield.reference_dataset(grid_step=args.grid_step)
    save_emf(ds, args.out)
    print(f"wrote {len(ds.grid)} angles x {ds.num_ports} ports to {args.out}")
    return 0


def _fit_ait(args, ds):
    ula = VirtualUlaConfig(
        element_count=args.elements, spacing=args.spacing, axis=Axis(args.axis)
    )
    plan = ait.partition_fov(args.sector_size, args.overlap)
    model = ait.fit(ds, ula, plan)
    sector_errors = [
        ait.transformation_error(model, ds, l) for l in range(plan.num_sectors)
    ]
    conditions = [
        _steering_condition(ula, ds.grid.angles[plan.sector_samples(ds.grid.angles, l)])
        for l in range(plan.num_sectors)
    ]
    doc = ait.model_to_dict(model)
    doc["report"] = {
        "sector_error": [float(x) for x in sector_errors],
        "mean_error": float(np.mean(sector_errors)),
        "steering_condition": conditions,
    }
    print(
        f"sector-mapping fit: {plan.num_sectors} sectors, "
        f"mean transformation error {doc['report']['mean_error']:.9g}"
    )
    return doc


def _fit_wm(args, ds):
    model = wavefield.fit(ds, args.coeffs)
    error = wavefield.approximation_error(model, ds)
    psi = wavefield.basis_matrix(ds.grid.angles, args.coeffs)
    sv = np.linalg.svd(psi, compute_uv=False)
    doc = {
        "family": "wm",
        "sampling": [[[float(v.real), float(v.imag)] for v in row] for row in model.sampling],
        "report": {
            "approximation_error": float(error),
            "gram_condition": float((sv[0] / sv[-1]) ** 2),
        },
    }
    print(f"wavefield fit: U={args.coeffs}, approximation error {error:.9g}")
    return doc


def cmd_fit(args) -> int:
    ds = load_emf(args.data)
    doc = _fit_ait(args, ds) if args.family == "ait" else _fit_wm(args, ds)
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"model written to {args.out}")
    return 0


def load_model_file(path):
    """Load either model family from its JSON export."""
    doc = json.loads(Path(path).read_text())
    family = doc.get("family")
    if family == "ait":
        return ait.model_from_dict(doc)
    if family == "wm":
        return wavefield.WmModel(
            sampling=np.array([[complex(re_v, im_v) for re_v, im_v in row] for row in doc["sampling"]])
        )
    raise SchemaError(f"{path}: unknown model family {family!r}")


def cmd_doa(args) -> int:
    model = load_model_file(args.model)
    ds = load_emf(args.data)
    if ds.num_ports != model.num_ports:
        raise SchemaError(
            f"dataset has {ds.num_ports} ports but the model provides {model.num_ports}"
        )
    truth = [float(t) for t in args.theta]
    snr_db = float("inf") if args.noise_free else args.snr_db
    if snr_db is None:
        raise ArgError("pass --snr-db or --noise-free")
    engine = MlDoaEstimator(model, SearchConfig(source_count=len(truth)))
    rows = []
    for run in range(args.runs):
        stream = np.random.SeedSequence(entropy=args.seed, spawn_key=(0, run))
        batch = synth_snapshots(ds, truth, snr_db, args.snapshots, stream)
        estimates = engine.estimate(batch)
        for q, (est, true) in enumerate(zip(estimates, sorted(truth)), start=1):
            rows.append((run, q, est, true, est - true))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "source", "estimate_deg", "truth_deg", "error_deg"])
        for run, q, est, true, err in rows:
            writer.writerow([run, q, _fmt(est), _fmt(true), _fmt(err)])
    for q, true in enumerate(sorted(truth), start=1):
        ests = [est for _, src, est, _, _ in rows if src == q]
        print(f"source {q} at {true} deg: rmse {rmse(ests, true):.9g} deg over {args.runs} runs")
    print(f"estimates written to {args.out}")
    return 0


def _resolve_config(name: str) -> dict:
    path = Path(name)
    if path.exists():
        return json.loads(path.read_text())
    base = resources.files("mmadoa.data").joinpath("configs")
    for candidate in (name, f"{name}.json"):
        ref = base.joinpath(candidate)
        if ref.is_file():
            return json.loads(ref.read_text())
    raise IngestError(f"sweep config {name!r} not found (not a file, not a bundled config)")


def _estimator_from_doc(doc: dict):
    family = doc.get("family")
    if family == "ait":
        return AitParams(
            elements=int(doc.get("elements", 4)),
            spacing=float(doc.get("spacing", 0.25)),
            axis=Axis(doc.get("axis", "z")),
            sector_size=float(doc.get("sector_size", 30.0)),
            overlap=float(doc.get("overlap", 15.0)),
        )
    if family == "wm":
        return WmParams(coefficients=int(doc.get("coefficients", 13)))
    raise ArgError(f"unknown estimator family {family!r} in sweep config")


def _dataset_from_doc(doc: dict):
    if "path" in doc:
        return load_emf(doc["path"])
    if doc.get("source", "reference") == "reference":
        return wavefield.reference_dataset(grid_step=float(doc.get("grid_step", 5.0)))
    raise ArgError(f"unknown dataset source {doc.get('source')!r} in sweep config")


def _run_one_sweep(ds, base_cfg: ExperimentConfig, spec: dict, out_dir: Path) -> Path:
    name = spec["name"]
    kind = SweepKind(spec["kind"])
    cfg = base_cfg
    if "snr_db" in spec:
        cfg = replace(cfg, snr_db=float(spec["snr_db"]))
    if "runs" in spec:
        cfg = replace(cfg, runs=int(spec["runs"]))
    if "estimator" in spec:
        cfg = replace(cfg, estimator=_estimator_from_doc(spec["estimator"]))
    out_csv = out_dir / f"{name}.csv"
    if kind is SweepKind.ORIENTATION or spec.get("metric") == "transformation_error":
        if not isinstance(cfg.estimator, AitParams):
            raise ArgError("transformation-error sweeps need a sector-mapping estimator")
        points = transformation_error_sweep(ds, cfg.estimator, kind, spec["values"])
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "mean_transformation_error"])
            for value, err in points:
                writer.writerow([value if isinstance(value, str) else _fmt(value), _fmt(err)])
    else:
        points = run_sweep(ds, cfg, kind, spec["values"])
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "theta_deg", "rmse_deg", "mean_rmse_deg"])
            for value, result in points:
                for theta, per_rmse, mean_rmse in result.rows():
                    writer.writerow([_fmt(value), _fmt(theta), _fmt(per_rmse), _fmt(mean_rmse)])
        summary = {
            "sweep": name,
            "kind": kind.value,
            "points": [
                {"parameter": value, "mean_rmse_deg": result.mean_rmse, "config": result.config}
                for value, result in points
            ],
        }
        (out_dir / f"{name}.json").write_text(json.dumps(summary, indent=1) + "\n")
    return out_csv


def cmd_sweep(args) -> int:
    config = _resolve_config(args.config)
    sweeps = config.get("sweeps", [])
    if not sweeps:
        raise ArgError("sweep config lists no sweeps")
    ds = _dataset_from_doc(config.get("dataset", {}))
    base_cfg = ExperimentConfig(
        estimator=_estimator_from_doc(config["estimator"]),
        snr_db=float(config.get("snr_db", 20.0)),
        snapshots=int(args.snapshots or config.get("snapshots", 1000)),
        runs=int(args.runs or config.get("runs", 100)),
        seed=int(config.get("seed", 0) if args.seed is None else args.seed),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    for spec in sweeps:
        out_csv = out_dir / f"{spec.get('name', 'sweep')}.csv"
        try:
            out_csv = _run_one_sweep(ds, base_cfg, spec, out_dir)
            print(f"sweep {spec['name']}: wrote {out_csv}")
        except MmadoaError as exc:
            failures.append((spec.get("name", "?"), exc))
            if out_csv.exists():
                flagged = out_csv.with_suffix(".partial.csv")
                out_csv.rename(flagged)
                print(f"sweep {spec.get('name')}: FAILED, partial output flagged as {flagged}")
            else:
                print(f"sweep {spec.get('name')}: FAILED ({exc})")
    if failures:
        for name, exc in failures:
            print(f"error in sweep {name}: {exc}", file=sys.stderr)
        first = failures[0][1]
        return 3 if isinstance(first, NUMERIC_ERRORS) else 2
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmadoa",
        description="Multi-mode antenna modeling and direction-of-arrival estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="write the bundled reference calibration dataset")
    p.add_argument("--grid-step", type=float, default=5.0, help="grid step in degrees (divides 180)")
    p.add_argument("--out", required=True, help="output dataset path (.csv or .json)")
    p.set_defaults(run=cmd_synthesize)

    p = sub.add_parser("fit", help="fit a model to a calibration dataset")
    family = p.add_mutually_exclusive_group(required=True)
    family.add_argument("--ait", dest="family", action="store_const", const="ait",
                        help="sector-mapped virtual array model")
    family.add_argument("--wm", dest="family", action="store_const", const="wm",
                        help="wavefield expansion model")
    p.add_argument("--data", required=True, help="calibration dataset path")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--elements", type=int, default=4)
    p.add_argument("--spacing", type=float, default=0.25, help="element spacing in wavelengths")
    p.add_argument("--axis", choices=[a.value for a in Axis], default="z")
    p.add_argument("--sector-size", type=float, default=30.0)
    p.add_argument("--overlap", type=float, default=15.0)
    p.add_argument("--coeffs", type=int, default=13, help="wavefield coefficient count (odd)")
    p.set_defaults(run=cmd_fit)

    p = sub.add_parser("doa", help="estimate directions from synthesized snapshots")
    p.add_argument("--model", required=True, help="model JSON from the fit command")
    p.add_argument("--data", required=True, help="truth calibration dataset path")
    p.add_argument("--theta", type=float, nargs="+", required=True,
                   help="true source angle(s) on the calibration grid")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--noise-free", action="store_true")
    p.add_argument("--snapshots", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output estimates CSV path")
    p.set_defaults(run=cmd_doa)

    p = sub.add_parser("sweep", help="run the parameter sweeps of a config file")
    p.add_argument("--config", required=True,
                   help="sweep config path or bundled name (sector_size, wm_coefficients)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--runs", type=int, default=None, help="override Monte Carlo runs per angle")
    p.add_argument("--snapshots", type=int, default=None)
    p.set_defaults(run=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except IO_ERRORS as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
