"""Command-line entry points.

Verbs::

    pnpmap run <config.toml> [--out DIR]      full experiment; exit 0 iff no
                                              cell diverged
    pnpmap gates <config.toml>                print gate reports as JSON lines
    pnpmap probe <config.toml>                denoiser Lipschitz/Tweedie probe
    pnpmap degrade <config.toml> --out DIR    emit degraded inputs only
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (ExperimentConfig, degraded_for_config, gates_for_config,
                      probe_for_config, run_experiment)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnpmap")
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("config")
    run.add_argument("--out", default="out", help="output directory")

    gates = sub.add_parser("gates", help="print convergence gate reports")
    gates.add_argument("config")

    probe = sub.add_parser("probe", help="probe the configured denoiser")
    probe.add_argument("config")

    degrade = sub.add_parser("degrade", help="write degraded inputs only")
    degrade.add_argument("config")
    degrade.add_argument("--out", default="degraded", help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = ExperimentConfig.from_toml(args.config)

    if args.verb == "run":
        result = run_experiment(cfg, out_dir=args.out)
        for agg in result.aggregates:
            print(f"{agg['solver']} alpha={agg['alpha']}: "
                  f"PSNR {agg['psnr_mean']:.2f} +/- {agg['psnr_std']:.2f} dB, "
                  f"SSIM {agg['ssim_mean']:.4f} +/- {agg['ssim_std']:.4f} "
                  f"({agg['diverged']}/{agg['cells']} diverged)")
        print(f"wrote {len(result.rows)} rows to {args.out}/metrics.csv")
        return 1 if result.any_diverged else 0

    if args.verb == "gates":
        for report in gates_for_config(cfg):
            print(json.dumps(report, sort_keys=True))
        return 0

    if args.verb == "probe":
        print(json.dumps(probe_for_config(cfg), sort_keys=True))
        return 0

    paths = degraded_for_config(cfg, args.out)
    print(f"wrote {len(paths)} degraded observations to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
