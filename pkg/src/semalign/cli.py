"""Command-line interface.

Subcommands: ``generate`` (write a synthetic population to latent-set
files), ``align`` (one federated run), ``baseline`` (one baseline run),
``sweep`` (full grid to CSV), ``report`` (summary tables and figures from a
sweep CSV).  Every experiment option can come from a ``key = value`` config
file and be overridden by a flag of the same name.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields

from . import harness
from .harness import ExperimentConfig, config_from_mapping, load_config
from .semantic import generate_population, save_latent_set


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key = value config file")
    for f in fields(ExperimentConfig):
        parser.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", default=None)


def _build_config(args) -> ExperimentConfig:
    pairs = {}
    if args.config:
        cfg = load_config(args.config)
        pairs = {f.name: getattr(cfg, f.name) for f in fields(ExperimentConfig)}
    for f in fields(ExperimentConfig):
        override = getattr(args, f"cfg_{f.name}", None)
        if override is not None:
            pairs[f.name] = override
    return config_from_mapping(pairs)


def _print_records(records):
    print(",".join(harness.CSV_HEADER))
    for rec in records:
        print(",".join(str(v) for v in rec.row()))


def cmd_generate(args):
    cfg = _build_config(args)
    seed = cfg.seeds[0]
    pop = generate_population(cfg.population_config(seed))
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for s in (pop.ap, *pop.users):
        path = os.path.join(args.out_dir, f"{s.agent_id}.semlat")
        save_latent_set(s, path)
        written.append(path)
    print(f"wrote {len(written)} latent-set files to {args.out_dir} (seed {seed})")


def cmd_align(args):
    cfg = _build_config(args)
    if cfg.method != "federated":
        cfg = config_from_mapping({**_as_pairs(cfg), "method": "federated"})
    _print_records(harness.run_experiment(cfg))


def cmd_baseline(args):
    cfg = _build_config(args)
    if cfg.method not in ("first_k", "top_k", "multilink"):
        raise SystemExit(
            f"baseline needs --method first_k|top_k|multilink, got {cfg.method!r}"
        )
    _print_records(harness.run_experiment(cfg))


def _as_pairs(cfg: ExperimentConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(ExperimentConfig)}


def cmd_sweep(args):
    cfg = _build_config(args)
    axes = {}
    if args.zetas:
        axes["zeta"] = [float(z) for z in args.zetas.split(",")]
    if args.snrs:
        axes["snr_db"] = [float(s) for s in args.snrs.split(",")]
    if args.pilot_fractions:
        axes["pilot_fraction"] = [float(p) for p in args.pilot_fractions.split(",")]
    if args.heterogeneities:
        axes["heterogeneity"] = args.heterogeneities.split(",")
    methods = args.methods.split(",") if args.methods else None

    def progress(point, method):
        desc = " ".join(f"{k}={v}" for k, v in point.items())
        print(f"[sweep] {method} {desc}", flush=True)

    records = harness.run_sweep(cfg, axes, methods=methods, progress=progress)
    print(f"wrote {len(records)} rows to {cfg.output}")


def cmd_report(args):
    from .report import render_report

    paths = render_report(args.csv, args.out_dir)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semalign",
        description="Federated latent-space alignment simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic population to files")
    _add_config_flags(p)
    p.add_argument("--out-dir", default="population")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("align", help="one federated alignment run")
    _add_config_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("baseline", help="one baseline run (first_k/top_k/multilink)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="full grid to CSV")
    _add_config_flags(p)
    p.add_argument("--zetas", help="comma list of compression factors")
    p.add_argument("--snrs", help="comma list of SNRs in dB")
    p.add_argument("--pilot-fractions", dest="pilot_fractions",
                   help="comma list of pilot fractions")
    p.add_argument("--heterogeneities", help="comma list of population modes")
    p.add_argument("--methods", help="comma list of methods to run")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summaries and figures from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out-dir", default="reports")
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
