"""Command line entry point: ``opmimo {ber-sweep,hardening,channel-surface,validate-config}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import sim
from .channel import generate_channel, save_channel
from .config import (ConfigError, CsiModel, PrecoderKind, SystemConfig, dumps_config,
                     load_config, parse_velocity, validate)
from .kernels import BACKEND


def _csv_list(kind):
    def parse(text: str):
        return [kind(x) for x in text.split(",") if x]
    return parse


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file (SI units)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field; repeatable")
    p.add_argument("--profile", choices=sorted(sim.PROFILES),
                   help="desk (A=16, F=500) or paper (A=64, F=2000) scale")
    p.add_argument("--seed", type=int, help="rng_seed override")
    p.add_argument("--antennas", type=int, help="num_antennas override")
    p.add_argument("--frames", type=int, help="num_frames override")
    p.add_argument("--velocity", help="velocity, e.g. 200km/h or 55.6m/s (bare numbers are m/s)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")


def build_config(args: argparse.Namespace) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    if args.profile:
        cfg = cfg.replace(**sim.PROFILES[args.profile])
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    cfg = cfg.replace(**overrides)
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    if args.antennas is not None:
        cfg = cfg.replace(num_antennas=args.antennas)
    if args.frames is not None:
        cfg = cfg.replace(num_frames=args.frames)
    if args.velocity is not None:
        cfg = cfg.replace(velocity=parse_velocity(args.velocity))
    return cfg


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    v = validate(cfg)
    sys.stdout.write(dumps_config(cfg))
    print(f"# symbol_duration = {v.symbol_duration!r}")
    print(f"# max_doppler = {v.max_doppler!r}")
    print(f"# grid_size = {v.grid_size}")
    print(f"# num_taps = {v.num_taps}")
    print(f"# info_bits = {v.info_length}")
    print(f"# fingerprint = {v.fingerprint()}")
    if args.write:
        Path(args.write).write_text(dumps_config(cfg))
    return 0


def cmd_ber_sweep(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    axes = []
    if args.precoders:
        axes.append(("precoder_kind", args.precoders))
    if args.csi:
        axes.append(("csi_model", args.csi))
    ebn0 = args.ebn0 or list(sim.FULL_EBN0 if args.profile == "paper" else sim.DESK_EBN0)
    axes.append((sim.EBN0_AXIS, ebn0))
    plan = sim.ExperimentPlan(
        base=cfg, axes=axes, max_frames=args.max_frames, min_bit_errors=args.min_errors,
        output_dir=args.out, workers=args.workers, noiseless=args.noiseless,
    )
    records = sim.run_ber_sweep(plan)
    for r in records:
        row = r.row()
        print(f"{row['point']:<48} BER {r.tally.ber:.3e}  FER {r.tally.fer:.3e}  "
              f"errors {r.tally.bit_errors:>7}  frames {r.tally.frames}")
    if args.diagnostics:
        first = plan.point_config(next(iter(plan.points())))
        sim.iteration_diagnostics(first, range(args.diagnostic_frames), args.out / "iterations.csv")
    return 0


def cmd_hardening(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    res = sim.run_hardening_study(cfg, args.out, args.workers)
    sys.stdout.write(res.table)
    return 0


def cmd_surface(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if args.csi:
        cfg = cfg.replace(csi_model=args.csi)
    name = f"combined_channel_{cfg.csi_model.value}.csv"
    surface = sim.dump_combined_channel(cfg, args.out / name, args.frame)
    print(f"wrote {args.out / name}: |phi| range {surface.min():.4g} .. {surface.max():.4g}")
    if args.tensor:
        v = validate(cfg)
        save_channel(generate_channel(v, sim.frame_rng(cfg.rng_seed, args.frame, "channel")), args.tensor)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opmimo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"opmimo ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-config", help="check a config and print derived quantities")
    _common(p)
    p.add_argument("--write", type=Path, help="write the effective config to this file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ber-sweep", help="BER vs Eb/N0 sweep")
    _common(p)
    p.add_argument("--ebn0", type=_csv_list(float), help="comma-separated Eb/N0 points in dB")
    p.add_argument("--precoders", type=_csv_list(lambda s: PrecoderKind(s.upper())),
                   default=[PrecoderKind.WHT, PrecoderKind.IDENTITY])
    p.add_argument("--csi", type=_csv_list(lambda s: CsiModel(s.upper())))
    p.add_argument("--max-frames", type=int)
    p.add_argument("--min-errors", type=int, default=200)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--diagnostics", action="store_true", help="write per-iteration iterations.csv")
    p.add_argument("--diagnostic-frames", type=int, default=20)
    p.set_defaults(func=cmd_ber_sweep)

    p = sub.add_parser("hardening", help="beta table and gamma pdfs")
    _common(p)
    p.set_defaults(func=cmd_hardening)

    p = sub.add_parser("channel-surface", help="|phi| surface of one frame")
    _common(p)
    p.add_argument("--csi", type=lambda s: CsiModel(s.upper()))
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--tensor", type=Path, help="also dump the raw channel tensor (binary)")
    p.set_defaults(func=cmd_surface)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.error(str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
