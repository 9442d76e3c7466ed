"""Command-line pipeline.

Subcommands: score, verify, sweep, heatmap, lift, bench-vqa, compare,
extract, annotate. Every command that writes files drops a run manifest
(config snapshot, input hashes, tool version, timestamp, output paths) next
to its outputs; reruns with equal inputs and flags produce byte-identical
data files, manifests differing only in timestamp.

Exit codes: 0 success, 1 input/usage/runtime error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (GridSpec, analytic_derivatives, fd_derivatives,
                       verify_monotonicity)
from .core import DEFAULT_HYPERPARAMS, Hyperparams, balance, sea
from .dataset import (DatasetError, compute_lift, frequency_to_csv,
                      global_frequency, lift_to_csv, load_annotations, load_db)
from .evaluation import (AlignmentError, agreement, score_vqa,
                         summarize_distribution)
from .providers import (ExtractionError, FixtureProvider, ProviderConfig,
                        ProviderError, ResponseCache, VqaResult,
                        annotate_elements, classify, extract_commonsense)
from .sweeps import (HeatmapSpec, SweepSpec, default_ablation_rows, render_svg,
                     run_heatmap, run_sweep)

__all__ = ["main", "entry"]

_HP_FLAGS = ("alpha", "beta", "lambda_", "eta", "k", "tau", "r", "gamma",
             "delta", "epsilon_clip")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); 2 means verify failure here
        raise UsageError(message)


def _add_hp_flags(parser) -> None:
    group = parser.add_argument_group("hyperparameter overrides")
    for name in _HP_FLAGS:
        group.add_argument(f"--{name.rstrip('_').replace('_', '-')}",
                           dest=f"hp_{name}", type=float, default=None)


def _resolve_hp(args, config: dict) -> Hyperparams:
    """CLI flag > config file > built-in default."""
    values = dict(DEFAULT_HYPERPARAMS.to_dict())
    values.update(config.get("hyperparams", {}))
    for name in _HP_FLAGS:
        override = getattr(args, f"hp_{name}", None)
        if override is not None:
            values[name] = override
    return Hyperparams(**values)


def _load_config(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    with open(args.config, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise UsageError(f"{args.config}: config must be a JSON object")
    return obj


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, config_snapshot: dict,
                    inputs: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "config": config_snapshot,
        "input_hashes": {str(k): _sha256(v) for k, v in inputs.items()},
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": outputs,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cache(args) -> ResponseCache | None:
    cache_dir = getattr(args, "cache_dir", None)
    return ResponseCache(cache_dir) if cache_dir else None


# --------------------------------------------------------------------------
# score


def _provider_configs(path) -> dict[str, ProviderConfig]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "endpoint_url" in obj:  # flat single-op config
        cfg = ProviderConfig(**{k: v for k, v in obj.items()
                                if k in ProviderConfig.__dataclass_fields__})
        return {"vqa": cfg, "classifier": cfg, "extraction": cfg}
    out = {}
    for role, sub in obj.items():
        out[role] = ProviderConfig(**{k: v for k, v in sub.items()
                                      if k in ProviderConfig.__dataclass_fields__})
    return out


def cmd_score(args) -> int:
    config = _load_config(args)
    hp = _resolve_hp(args, config)
    db = load_db(args.db, categories_path=args.categories)
    records = load_annotations(args.annotations, db)
    inputs = {"db": args.db, "annotations": args.annotations}
    if args.probs:
        provider = FixtureProvider.from_files(db, args.probs)
        signal_pairs = [(rec, provider.signals(rec)) for rec in records]
        inputs["probs"] = args.probs
    elif args.provider_config:
        signal_pairs = _provider_signals(args, db, records)
        inputs["provider_config"] = args.provider_config
    else:
        raise UsageError("score needs --probs (offline) or --provider-config")

    out = _out_dir(args)
    scores_path = out / "scores.jsonl"
    rows = []
    for rec, signals in signal_pairs:
        breakdown = sea(signals, hp)
        row = {"sketch_id": rec.sketch_id, "class": rec.class_name,
               "E": signals.E, "V": signals.V, "P": signals.P,
               "provenance": signals.provenance.P}
        row.update(breakdown.to_dict())
        rows.append(row)
    with open(scores_path, "w", encoding="utf-8", newline="") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    summary = summarize_distribution([r["sea"] for r in rows], value_range=(-1.0, 1.0))
    summary_path = out / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "score", {"hyperparams": hp.to_dict()}, inputs,
                    [scores_path.name, summary_path.name])
    print(f"scored {len(rows)} sketches -> {scores_path}")
    print(f"summary: mean={summary.mean:.4f} std={summary.std:.4f} mode={summary.mode:.4f}")
    return 0


def _provider_signals(args, db, records):
    from .core import Provenance, Signals

    if not args.images_dir:
        raise UsageError("--provider-config mode needs --images-dir")
    configs = _provider_configs(args.provider_config)
    cache = _cache(args)
    labels = sorted(db.classes)
    pairs = []
    for rec in records:
        image_path = Path(args.images_dir) / f"{rec.sketch_id}.png"
        image = image_path.read_bytes() if image_path.exists() else None
        elements = db.classes[rec.class_name]
        vqa = annotate_elements(image, rec.class_name, elements, configs["vqa"],
                                sketch_id=rec.sketch_id, cache=cache)
        cls = classify(image, labels, rec.class_name, configs["classifier"],
                       sketch_id=rec.sketch_id, cache=cache)
        signals = Signals(E=len(elements), V=float(vqa.visible_count),
                          P=cls.ground_truth_prob,
                          provenance=Provenance(E="db",
                                                V=configs["vqa"].model_name,
                                                P=configs["classifier"].model_name))
        pairs.append((rec, signals))
    return pairs


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    config = _load_config(args)
    hp = _resolve_hp(args, config)
    grid = GridSpec(p_start=args.p_min, p_stop=args.p_max, p_step=args.step,
                    v_start=args.v_min, v_stop=args.v_max, v_step=args.step,
                    e_values=tuple(int(e) for e in args.e_values.split(",")))
    report = verify_monotonicity(grid, hp, low_p_max=args.low_p_max,
                                 tolerance=args.tolerance)

    rng = np.random.default_rng(args.seed)
    worst_rel = 0.0
    for _ in range(args.fd_points):
        p = float(rng.uniform(0.1, 0.9))
        v = float(rng.uniform(0.05, 0.98))
        ana = analytic_derivatives(p, v, hp)
        fd = fd_derivatives(p, v, hp, h=1e-6)
        for a, f in ((ana.dZ_dP, fd.dZ_dP), (ana.dZ_dv, fd.dZ_dv),
                     (ana.dS_dP, fd.dS_dP), (ana.dS_dv, fd.dS_dv)):
            worst_rel = max(worst_rel, abs(a - f) / max(1.0, abs(a)))
    fd_ok = worst_rel <= 1e-5

    # sweep-shape checks at the three reference recognizability levels
    table = run_sweep(SweepSpec(hp=hp))
    low_row = table.sea[0]
    low_decreasing = bool(np.all(np.diff(low_row) < 0))
    v_dense = np.arange(0.02, 1.0, 1e-4)
    dzdv_sign = np.sign([float(balance(0.8, v + 5e-5, hp) - balance(0.8, v - 5e-5, hp))
                         for v in (0.25, 0.6, 0.95)])  # coarse probe for reporting only
    high_sign_changes = int(np.count_nonzero(np.diff(np.sign(
        _dzdv_vec(0.8, v_dense, hp))) != 0))

    payload = report.to_dict()
    payload["fd_agreement"] = {"points": args.fd_points, "worst_rel_err": worst_rel,
                               "passed": fd_ok, "seed": args.seed}
    payload["sweep_shape"] = {"p_low_strictly_decreasing": low_decreasing,
                              "p_high_dzdv_sign_changes": high_sign_changes,
                              "probe_signs_at_p_high": [float(s) for s in dzdv_sign]}
    text = json.dumps(payload, indent=2)
    if args.out:
        out = _out_dir(args)
        (out / "region_report.json").write_text(text + "\n", encoding="utf-8")
        _write_manifest(out, "verify", {"hyperparams": hp.to_dict(),
                                        "grid": grid.to_dict()}, {},
                        ["region_report.json"])
        print(f"report -> {out / 'region_report.json'}")
    else:
        print(text)

    ok = report.passed and fd_ok and low_decreasing and high_sign_changes == 1
    if ok:
        print("verify: all constraints satisfied")
        return 0
    print(f"verify: violations (monotone_P={report.monotone_P_violations}, "
          f"low_P_v={report.low_P_monotone_v_violations}, fd_ok={fd_ok}, "
          f"low_decreasing={low_decreasing}, sign_changes={high_sign_changes})")
    return 0 if args.explore else 2


def _dzdv_vec(p: float, v: np.ndarray, hp: Hyperparams) -> np.ndarray:
    from .analysis import _dz_dv

    return np.asarray(_dz_dv(np.full_like(v, p), v, hp))


# --------------------------------------------------------------------------
# sweep / heatmap


def cmd_sweep(args) -> int:
    config = _load_config(args)
    hp = _resolve_hp(args, config)
    spec = SweepSpec(v_start=args.v_start, v_stop=args.v_stop, v_step=args.v_step,
                     p_levels=tuple(float(p) for p in args.p_levels.split(",")),
                     E=args.E, hp=hp)
    table = run_sweep(spec)
    out = _out_dir(args)
    (out / "sweep.csv").write_text(table.to_csv(), encoding="utf-8")
    (out / "sweep.svg").write_text(render_svg(table, title="score vs visual ratio"),
                                   encoding="utf-8")
    _write_manifest(out, "sweep", {"hyperparams": hp.to_dict(),
                                   "spec": {"v": [spec.v_start, spec.v_stop, spec.v_step],
                                            "p_levels": list(spec.p_levels), "E": spec.E}},
                    {}, ["sweep.csv", "sweep.svg"])
    print(f"sweep -> {out / 'sweep.csv'}, {out / 'sweep.svg'}")
    return 0


def cmd_heatmap(args) -> int:
    config = _load_config(args)
    hp = _resolve_hp(args, config)

    def axis(text):
        lo, hi, n = text.split(",")
        return (float(lo), float(hi), int(n))

    spec = HeatmapSpec(v_axis=axis(args.v_axis), p_axis=axis(args.p_axis),
                       rows=default_ablation_rows(hp, low_factor=args.low_factor,
                                                  high_factor=args.high_factor))
    result = run_heatmap(spec)
    out = _out_dir(args)
    (out / "heatmap.json").write_text(result.to_json(), encoding="utf-8")
    (out / "heatmap.svg").write_text(render_svg(result, title="hyperparameter ablation"),
                                     encoding="utf-8")
    _write_manifest(out, "heatmap", {"hyperparams": hp.to_dict(),
                                     "v_axis": list(spec.v_axis),
                                     "p_axis": list(spec.p_axis),
                                     "low_factor": args.low_factor,
                                     "high_factor": args.high_factor},
                    {}, ["heatmap.json", "heatmap.svg"])
    n_panels = len(result.row_names) * len(result.column_names)
    print(f"heatmap ({n_panels} panels) -> {out / 'heatmap.svg'}")
    return 0


# --------------------------------------------------------------------------
# dataset statistics


def cmd_lift(args) -> int:
    db = load_db(args.db, categories_path=args.categories)
    rows = compute_lift(db, min_support=args.min_support) if db.classes else []
    ranked = global_frequency(db)
    out = _out_dir(args)
    (out / "lift.csv").write_text(lift_to_csv(rows), encoding="utf-8")
    (out / "global_frequency.csv").write_text(frequency_to_csv(ranked), encoding="utf-8")
    _write_manifest(out, "lift", {"min_support": args.min_support},
                    {"db": args.db, "categories": args.categories},
                    ["lift.csv", "global_frequency.csv"])
    print(f"lift rows: {len(rows)}, elements ranked: {len(ranked)} -> {out}")
    return 0


# --------------------------------------------------------------------------
# vqa benchmark and score comparison


def _load_prediction_file(path) -> list[VqaResult]:
    results = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                results.append(VqaResult(
                    sketch_id=str(obj["sketch_id"]),
                    presence={str(k): bool(v) for k, v in obj["presence"].items()},
                    raw_response=obj.get("raw_response", ""),
                    parse_status=obj.get("parse_status", "ok")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad prediction row: {exc}") from exc
    return results


def cmd_bench_vqa(args) -> int:
    db = load_db(args.db, categories_path=args.categories)
    truth = load_annotations(args.truth, db)
    categories = db.category_of or None
    pred_files = sorted(Path(args.predictions_dir).glob("*.jsonl"))
    if not pred_files:
        raise UsageError(f"no *.jsonl prediction files in {args.predictions_dir}")
    table = {}
    for path in pred_files:
        predictions = _load_prediction_file(path)
        table[path.stem] = score_vqa(predictions, truth, categories=categories).to_dict()
    out = _out_dir(args)
    (out / "bench_vqa.json").write_text(json.dumps(table, indent=2) + "\n",
                                        encoding="utf-8")
    lines = ["model,tp,fp,tn,fn,precision,recall,f1,accuracy,specificity"]
    for model in sorted(table):
        row = table[model]
        lines.append(",".join([model] + [str(row[k]) for k in
                                         ("tp", "fp", "tn", "fn")] +
                              [repr(row[k]) if row[k] is not None else ""
                               for k in ("precision", "recall", "f1",
                                         "accuracy", "specificity")]))
    (out / "bench_vqa.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, "bench-vqa", {},
                    {"truth": args.truth, "db": args.db,
                     **{f"pred:{p.name}": p for p in pred_files}},
                    ["bench_vqa.json", "bench_vqa.csv"])
    for model in sorted(table):
        row = table[model]
        print(f"{model}: precision={row['precision']} recall={row['recall']} "
              f"f1={row['f1']} accuracy={row['accuracy']}")
    return 0


def _load_scores(path) -> dict[str, float]:
    scores = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            scores[str(obj["sketch_id"])] = float(obj["sea"])
    return scores


def cmd_compare(args) -> int:
    a = _load_scores(args.scores_a)
    b = _load_scores(args.scores_b)
    shared = sorted(set(a) & set(b))
    if len(shared) < 2:
        raise AlignmentError(
            f"score files share {len(shared)} sketch ids; need at least 2")
    report = agreement([a[s] for s in shared], [b[s] for s in shared])
    print(report.to_json())
    if args.out:
        out = _out_dir(args)
        (out / "agreement.json").write_text(report.to_json() + "\n", encoding="utf-8")
        _write_manifest(out, "compare", {},
                        {"scores_a": args.scores_a, "scores_b": args.scores_b},
                        ["agreement.json"])
    return 0


# --------------------------------------------------------------------------
# provider passthrough commands


def cmd_extract(args) -> int:
    configs = _provider_configs(args.provider_config)
    cfg = configs.get("extraction") or next(iter(configs.values()))
    elements = extract_commonsense(args.class_name, cfg, cache=_cache(args))
    payload = {"class": args.class_name, "total_elements": len(elements),
               "elements": [e.to_dict() for e in elements]}
    print(json.dumps(payload, indent=2))
    return 0


def cmd_annotate(args) -> int:
    db = load_db(args.db)
    if args.class_name not in db.classes:
        raise DatasetError(f"unknown class {args.class_name!r}")
    configs = _provider_configs(args.provider_config)
    cfg = configs.get("vqa") or next(iter(configs.values()))
    image = Path(args.image).read_bytes()
    result = annotate_elements(image, args.class_name, db.classes[args.class_name],
                               cfg, sketch_id=args.sketch_id, cache=_cache(args))
    print(json.dumps({"sketch_id": result.sketch_id, "presence": result.presence,
                      "parse_status": result.parse_status}, indent=2))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="sea", description="sketch abstraction-efficiency scoring pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--cache-dir", default=None)
        if out_required:
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("score", help="score sketches from annotations + probabilities or providers")
    p.add_argument("--db", required=True)
    p.add_argument("--categories", default=None)
    p.add_argument("--annotations", required=True)
    p.add_argument("--probs", default=None)
    p.add_argument("--provider-config", default=None)
    p.add_argument("--images-dir", default=None)
    common(p)
    _add_hp_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("verify", help="run the surface constraint suite")
    p.add_argument("--p-min", type=float, default=0.1)
    p.add_argument("--p-max", type=float, default=0.99)
    p.add_argument("--v-min", type=float, default=0.05)
    p.add_argument("--v-max", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--e-values", default="4,8,16,32")
    p.add_argument("--low-p-max", type=float, default=0.3)
    p.add_argument("--tolerance", type=float, default=-1e-9)
    p.add_argument("--fd-points", type=int, default=1000)
    p.add_argument("--explore", action="store_true",
                   help="emit the report and exit 0 even on violations")
    common(p, out_required=False)
    _add_hp_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="score vs visual ratio at fixed recognizability levels")
    p.add_argument("--v-start", type=float, default=0.05)
    p.add_argument("--v-stop", type=float, default=1.0)
    p.add_argument("--v-step", type=float, default=0.005)
    p.add_argument("--p-levels", default="0.3,0.5,0.8")
    p.add_argument("-E", type=int, default=10)
    common(p)
    _add_hp_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("heatmap", help="hyperparameter-ablation surface grids")
    p.add_argument("--v-axis", default="0.02,1.0,200", metavar="LO,HI,N")
    p.add_argument("--p-axis", default="0.02,0.98,200", metavar="LO,HI,N")
    p.add_argument("--low-factor", type=float, default=0.5)
    p.add_argument("--high-factor", type=float, default=2.0)
    common(p)
    _add_hp_flags(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("lift", help="element lift and global frequency tables")
    p.add_argument("--db", required=True)
    p.add_argument("--categories", required=True)
    p.add_argument("--min-support", type=int, default=3)
    common(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("bench-vqa", help="score prediction dumps against ground truth")
    p.add_argument("--predictions-dir", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--categories", default=None)
    common(p)
    p.set_defaults(func=cmd_bench_vqa)

    p = sub.add_parser("compare", help="agreement between two score files")
    p.add_argument("scores_a")
    p.add_argument("scores_b")
    common(p, out_required=False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("extract", help="query the extraction model for a class's elements")
    p.add_argument("--class-name", required=True)
    p.add_argument("--provider-config", required=True)
    common(p, out_required=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("annotate", help="query the VQA model for element presence")
    p.add_argument("--image", required=True)
    p.add_argument("--class-name", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--sketch-id", default="sketch")
    p.add_argument("--provider-config", required=True)
    common(p, out_required=False)
    p.set_defaults(func=cmd_annotate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, ExtractionError, ProviderError, AlignmentError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
