"""Command line entry point: ``sepmap run-grid | run-explain | gen-synthetic``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InvalidSpec, SepMapError
from .experiment import ExperimentConfig, export_report, load_config, run_explain, run_grid
from .synthetic import SyntheticSpec, gen_synthetic


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _strs(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--manifest", type=Path, help="event manifest (overrides the config's data source)")
    p.add_argument("--obs-hours", type=_floats, help="comma-separated observation windows in hours")
    p.add_argument("--lag-mins", type=_floats, help="comma-separated lags in minutes")
    p.add_argument("--scenario", type=_strs, help="comma-separated scenarios")
    p.add_argument("--runs", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--bootstraps", type=_ints, help="comma-separated bootstrap iteration counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads; 0 = all cores (results do not change)")
    p.add_argument("--out", type=Path, default=Path("out"))


def build_parser():
    parser = argparse.ArgumentParser(prog="sepmap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run-grid", help="evaluate the scenario x window x lag grid"))
    _add_common(sub.add_parser("run-explain", help="bootstrap global feature mapping for one cell"))
    _add_common(sub.add_parser("gen-synthetic", help="write a synthetic manifest and slice files"))
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    elif args.manifest is not None:
        config = ExperimentConfig(manifest=str(args.manifest))
    else:
        config = ExperimentConfig(synthetic=SyntheticSpec())
    overrides = {}
    if args.manifest is not None:
        overrides.update(manifest=str(args.manifest), synthetic=None)
    for flag, name in (
        ("obs_hours", "obs_hours"),
        ("lag_mins", "lag_mins"),
        ("scenario", "scenarios"),
        ("runs", "runs"),
        ("bootstraps", "bootstraps"),
        ("seed", "seed"),
        ("threads", "threads"),
    ):
        val = getattr(args, flag)
        if val is not None:
            overrides[name] = val
    if args.trees is not None:
        overrides["forest"] = config.forest.replace(n_trees=args.trees)
    return config.replace(**overrides) if overrides else config


def _synthetic_spec(args) -> SyntheticSpec:
    if args.config is None:
        spec = SyntheticSpec()
    else:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"cannot read {args.config}: {exc}") from None
        spec = SyntheticSpec.from_dict(raw.get("synthetic", raw) if isinstance(raw, dict) else raw)
    if args.seed is not None:
        spec = SyntheticSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "gen-synthetic":
            manifest = gen_synthetic(_synthetic_spec(args), args.out)
            print(manifest)
        elif args.command == "run-grid":
            report = run_grid(resolve_config(args))
            json_path, csv_path = export_report(report, args.out)
            print(json_path)
            print(csv_path)
        else:
            config = resolve_config(args)
            for res in run_explain(config, out_dir=args.out):
                totals = ", ".join(f"{ch}={share:.3f}" for ch, share in res.profile.channel_totals.items())
                print(f"B={res.B}: {totals}")
    except SepMapError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
