"""Command line entry point: ``fgrx run`` and ``fgrx demo-scalar``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
from pydantic import ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fgrx", description="BP-MF-EP MIMO-OFDM receiver simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    run.add_argument("--config", required=True, help="campaign configuration (JSON)")
    run.add_argument("--snr", type=_floats, help="override the SNR grid, e.g. 0,2,4")
    run.add_argument("--variant", type=_names, help="override the variants, e.g. BpMfExact,BpMfEp")
    run.add_argument("--packets", type=int, help="packets per (variant, SNR)")
    run.add_argument("--iters", type=int, help="receiver iterations")
    run.add_argument("--seed", type=_u64, help="campaign seed (unsigned 64-bit)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--threads", type=int, help="worker processes (default: $FGRX_THREADS or 1)")
    run.add_argument("--timing", action="store_true", help="record wall-clock time in elapsed_s")
    run.add_argument("--no-plots", action="store_true", help="skip the SVG plots")
    run.add_argument("-q", "--quiet", action="store_true", help="no progress output")

    demo = sub.add_parser("demo-scalar", help="message traces on the single-observation interference model")
    demo.add_argument("--seed", type=int, default=3)
    demo.add_argument("--snr", type=float, default=6.0)
    demo.add_argument("--iters", type=int, default=4)
    return ap


def _load_config(args):
    from .harness import CampaignConfig

    with open(args.config) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("configuration must be a JSON object")
    cfg = CampaignConfig.model_validate(raw)
    update = {}
    if args.snr is not None:
        update["snr_grid"] = args.snr
    if args.variant is not None:
        update["variants"] = args.variant
    if args.packets is not None:
        update["n_packets"] = args.packets
    if args.iters is not None:
        update["n_iters"] = args.iters
    if args.seed is not None:
        update["seed"] = args.seed
    if args.out is not None:
        update["output_dir"] = args.out
    if args.timing:
        update["record_timing"] = True
    if update:
        # re-validate so overrides obey the same rules as the file
        cfg = CampaignConfig.model_validate({**cfg.model_dump(), **update})
    return cfg


def cmd_run(args) -> int:
    from .harness import CampaignError, resolve_threads, run_campaign, write_results
    from .plots import emit_plots

    try:
        cfg = _load_config(args)
        threads = resolve_threads(args.threads)
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as exc:
        print(f"fgrx: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(done, total):
        if not args.quiet and (done == total or done % max(1, total // 20) == 0):
            print(f"\r{done}/{total} packets", end="\n" if done == total else "", file=sys.stderr, flush=True)

    try:
        table = run_campaign(cfg, threads=threads, progress=progress)
    except (CampaignError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fgrx: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # e.g. the exact equalizer's domain cap
        print(f"fgrx: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = write_results(table, cfg.output_dir)
    if not args.no_plots:
        paths += emit_plots(table, cfg.output_dir)
    for (v, snr), n in sorted(table.failures.items()):
        print(f"fgrx: {n} packet(s) failed for {v} at {snr:g} dB", file=sys.stderr)
    if not args.quiet:
        last = table.final_iteration()
        print(f"{'variant':18s} {'snr_db':>7s} {'ber':>10s} {'channel_mse':>12s}")
        for r in table.select(iteration=last):
            print(f"{r.variant:18s} {r.snr_db:7g} {r.ber:10.3e} {r.channel_mse:12.3e}")
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_demo(args) -> int:
    from .scalar import demo

    try:
        demo(seed=args.seed, snr_db=args.snr, n_iters=args.iters)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fgrx: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_demo(args)


if __name__ == "__main__":
    sys.exit(main())
