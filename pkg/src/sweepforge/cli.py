"""Command-line entry point.

Structured results go to stdout (JSON with --json, terse text otherwise);
progress and errors go to stderr. Exit codes: 0 success, 1 usage error,
2 runtime error. All randomness is controlled by --seed / the config's
master_seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (GenerationConfig, generate_dataset, load_manifest,
                      validate_dataset)
from .metrics import evaluate_dirs
from .phantom import PhantomSpec, make_phantom
from .pngio import write_image16, write_label8
from .sweep import load_reference_sweep, place_sweep, slice_series, synth_reference_sweep
from .synthesis import ModalityCombo, SynthesisParams, external_synthesize, synthesize
from .volume import load_case, save_case


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sweep_arg(value: str):
    if value == "default":
        return synth_reference_sweep()
    return load_reference_sweep(value)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sweepforge",
                description="Virtual ultrasound sweep simulation and dataset generation.")
    p.add_argument("--version", action="version", version=f"sweepforge {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("phantom", help="generate a synthetic test case")
    sp.add_argument("--spec", default="default", help="phantom spec JSON, or 'default'")
    sp.add_argument("--out", required=True, help="case directory to write")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("place", help="solve one sweep placement and print it")
    sp.add_argument("--case", required=True, help="case directory")
    sp.add_argument("--sweep", default="default", help="reference sweep JSON, or 'default'")
    sp.add_argument("--lambda", dest="lambda_mm2", type=float, default=100.0,
                    help="contact sampling scale, mm^2")
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("generate", help="generate the full training dataset")
    sp.add_argument("--case", required=True)
    sp.add_argument("--config", required=True, help="GenerationConfig JSON")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=0,
                    help="parallel series jobs (default: logical cores)")
    sp.add_argument("--seed", type=int, default=None,
                    help="override the config's master_seed")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("synthesize", help="write a single synthetic series")
    sp.add_argument("--case", required=True)
    sp.add_argument("--sweep", default="default")
    sp.add_argument("--combo", required=True, help="e.g. ceT1+T2")
    sp.add_argument("--tau", type=float, default=1.0)
    sp.add_argument("--lambda", dest="lambda_mm2", type=float, default=100.0)
    sp.add_argument("--synth", default="procedural",
                    help="procedural, or exec:<path> for the external bridge")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("evaluate", help="Dice/ASSD between two mask directories")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--spacing", type=float, default=0.5, help="pixel size, mm")
    sp.add_argument("--out", default=".", help="where to write metrics.csv + summary.json")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("validate", help="re-check a generated dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("info", help="summarize a dataset manifest")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--json", action="store_true")
    return p


def _emit(payload: dict, as_json: bool, text: str | None = None) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
    else:
        print(text if text is not None else json.dumps(payload, indent=2))


def _cmd_phantom(args) -> int:
    spec = PhantomSpec() if args.spec == "default" else PhantomSpec.from_json(args.spec)
    case = make_phantom(spec, seed=args.seed, case_id=Path(args.out).name)
    save_case(case, args.out)
    _emit({"case_dir": str(args.out), "channels": sorted(case.channels),
           "dims": list(case.tumor.dims)}, args.json,
          text=f"wrote phantom case to {args.out}")
    return 0


def _cmd_place(args) -> int:
    case = load_case(args.case)
    ref = _sweep_arg(args.sweep)
    rng = np.random.default_rng(args.seed)
    placement = place_sweep(case, ref, args.lambda_mm2, rng, beta=args.beta)
    print(json.dumps(placement.to_dict(), indent=2))
    return 0


def _cmd_generate(args) -> int:
    case = load_case(args.case)
    config = GenerationConfig.from_json(args.config)
    if args.seed is not None:
        config.master_seed = args.seed
    jobs = args.jobs if args.jobs > 0 else (os_cpu_count())
    manifest = generate_dataset(case, config, out_dir=args.out, jobs=jobs)
    _emit({"out": str(args.out), "series": len(manifest["records"])}, args.json,
          text=f"wrote {len(manifest['records'])} series to {args.out}")
    return 0


def _cmd_synthesize(args) -> int:
    case = load_case(args.case)
    ref = _sweep_arg(args.sweep)
    combo = ModalityCombo.parse(args.combo)
    for m in combo.members:
        if m not in case.channels:
            raise ValueError(f"combo channel {m!r} not present in case")
    rng = np.random.default_rng(args.seed)
    placement = place_sweep(case, ref, args.lambda_mm2, rng)
    stack = slice_series(case, placement, ref, channels=combo.members)
    params = SynthesisParams(temperature=args.tau, seed=args.seed)
    if args.synth == "procedural":
        images = synthesize(stack, params)
    elif args.synth.startswith("exec:"):
        images = external_synthesize(args.synth[len("exec:"):], stack, params)
    else:
        raise _UsageError(f"unknown --synth {args.synth!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f_idx in range(ref.frame_count):
        write_image16(out / f"img_{f_idx:04d}.png", images[f_idx])
        write_label8(out / f"lbl_{f_idx:04d}.png", stack.labels[f_idx])
    with open(out / "meta.json", "w") as f:
        json.dump({"combo": combo.name, "tau": args.tau, "seed": args.seed,
                   "placement": placement.to_dict()}, f, indent=2)
        f.write("\n")
    _emit({"out": str(out), "frames": ref.frame_count}, args.json,
          text=f"wrote {ref.frame_count} frames to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    rows, summary = evaluate_dirs(args.pred, args.gt, args.spacing, out_dir=args.out)
    _emit(summary, args.json,
          text="\n".join(f"{k}: {v}" for k, v in summary.items()))
    return 0


def _cmd_validate(args) -> int:
    report = validate_dataset(args.dataset)
    payload = {"ok": report.ok, "checked_files": report.checked_files,
               "violations": report.violations}
    _emit(payload, args.json,
          text=("ok" if report.ok else "\n".join(report.violations)))
    return 0 if report.ok else 2


def _cmd_info(args) -> int:
    manifest = load_manifest(args.dataset)
    by_combo = {}
    for rec in manifest.get("records", []):
        by_combo[rec["combo"]] = by_combo.get(rec["combo"], 0) + 1
    payload = {
        "case_id": manifest.get("case_id"),
        "version": manifest.get("version"),
        "created": manifest.get("created"),
        "series": len(manifest.get("records", [])),
        "series_per_combo": by_combo,
        "temperatures": manifest.get("config", {}).get("temperatures"),
        "K": manifest.get("config", {}).get("K"),
    }
    _emit(payload, args.json)
    return 0


def os_cpu_count() -> int:
    import os
    return os.cpu_count() or 1


_COMMANDS = {
    "phantom": _cmd_phantom,
    "place": _cmd_place,
    "generate": _cmd_generate,
    "synthesize": _cmd_synthesize,
    "evaluate": _cmd_evaluate,
    "validate": _cmd_validate,
    "info": _cmd_info,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
