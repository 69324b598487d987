"""Command-line surface.

Subcommands:
  select     full pipeline: score the family, detect the boundary, emit reports
  curve      sensitivity scores only, no detection
  gradcheck  finite-difference audit of the input gradient for one config
  family     print stage widths and parameter counts of the family

Exit codes: 0 success, 1 validation/configuration error, 2 numerical error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import backends
from .dataio import load_dataset, sample_images
from .errors import ConfigurationError, NumericalError, ValidationError
from .family import FamilyConfig, build_family, default_stage_count
from .network import init_network, input_gradient
from .oracle import sample_safe_positions
from .pipeline import RunConfig, config_seed, run_selection
from .sensitivity import DEFAULT_MODE, MODES, TIE_BREAKS

DEFAULT_SIZE = (64, 64)
GRADCHECK_TOL = 1e-5


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")


def _family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base-channels", type=int, default=32, help="first-stage width")
    p.add_argument("--max-channels", type=int, default=512,
                   help="base channel cap (power of two); family size is log2(cap)+1")
    p.add_argument("--stages", type=int, default=None,
                   help="stage count (default: derived from the input size)")
    p.add_argument("--in-channels", type=int, default=None,
                   help="input channels (default: from the data)")
    p.add_argument("--classes", type=int, default=2, help="output class count")
    p.add_argument("--size", type=_parse_size, default=None, metavar="HxW",
                   help="input size (default: from the data)")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="directory of .pgm / .xtrt images")
    p.add_argument("--samples", type=int, default=8, help="batch size K")
    p.add_argument("--seed", type=int, default=0, help="base seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsel",
        description="Pick the smallest stable U-Net width from unlabeled images, "
                    "without training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run the full selection pipeline")
    _run_flags(p)
    _family_flags(p)
    p.add_argument("--mode", choices=MODES, default=DEFAULT_MODE)
    p.add_argument("--tie-break", choices=TIE_BREAKS, default="largest")
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument("--csv", default=None, help="curve CSV path")

    p = sub.add_parser("curve", help="emit the sensitivity curve, no detection")
    _run_flags(p)
    _family_flags(p)
    p.add_argument("--csv", default=None, help="curve CSV path")

    p = sub.add_parser("gradcheck", help="finite-difference audit of one config")
    p.add_argument("--data", default=None, help="optional image directory")
    p.add_argument("--samples", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    _family_flags(p)
    p.add_argument("--cap-index", type=int, default=0, help="family member to audit")
    p.add_argument("--positions", type=int, default=50)
    p.add_argument("--step", type=float, default=1e-4)

    p = sub.add_parser("family", help="print family schedules and parameter counts")
    _family_flags(p)
    return parser


def _build_fc(args, image_shape=None) -> FamilyConfig:
    if image_shape is not None:
        c, h, w = image_shape
    else:
        c, (h, w) = 1, DEFAULT_SIZE
    size = args.size if args.size is not None else (h, w)
    in_ch = args.in_channels if args.in_channels is not None else c
    stages = args.stages if args.stages is not None else default_stage_count(size)
    return FamilyConfig(input_size=size, base_channels=args.base_channels,
                        max_channels=args.max_channels, stages=stages,
                        in_channels=in_ch, out_classes=args.classes)


def _cmd_select(args) -> int:
    rc = RunConfig(
        data_dir=args.data, num_samples=args.samples, seed=args.seed,
        base_channels=args.base_channels, max_channels=args.max_channels,
        stages=args.stages, in_channels=args.in_channels, out_classes=args.classes,
        input_size=args.size, mode=args.mode, tie_break=args.tie_break,
        out_path=args.out, csv_path=args.csv,
    )
    report, curve = run_selection(rc)
    sel = report.selected
    print(f"k* = {report.k_star} (mode {report.mode}, tie-break {report.tie_break})")
    print(f"selected: cap_index {sel.cap_index}, cap {sel.cap}, "
          f"channels {list(sel.channels)}, params {sel.param_count}")
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return 0


def _cmd_curve(args) -> int:
    from .pipeline import emit_curve_csv, score_family, _family_config
    from .sensitivity import SensitivityCurve

    rc = RunConfig(data_dir=args.data, num_samples=args.samples, seed=args.seed,
                   base_channels=args.base_channels, max_channels=args.max_channels,
                   stages=args.stages, in_channels=args.in_channels,
                   out_classes=args.classes, input_size=args.size)
    ds = load_dataset(rc.data_dir)
    fc = _family_config(rc, ds)
    configs = build_family(fc)
    batch = sample_images(ds, rc.num_samples, rc.seed)
    scores = score_family(configs, fc, batch, rc.seed)
    curve = SensitivityCurve.from_raw(scores)
    print("cap_index cap params s_raw s_norm")
    for cfg, raw, norm in zip(configs, curve.raw, curve.normalized):
        print(f"{cfg.cap_index} {cfg.cap} {cfg.param_count} {raw:.6g} {norm:.6g}")
    if args.csv:
        emit_curve_csv(curve, configs, args.csv)
    return 0


def _cmd_gradcheck(args) -> int:
    if args.data is not None:
        ds = load_dataset(args.data)
        fc = _build_fc(args, ds.image_shape)
        batch = sample_images(ds, args.samples, args.seed)
    else:
        fc = _build_fc(args)
        rng = np.random.default_rng(args.seed)
        batch = rng.standard_normal((args.samples, fc.in_channels, *fc.input_size))
    configs = build_family(fc)
    if not 0 <= args.cap_index < len(configs):
        raise ConfigurationError(
            f"cap-index {args.cap_index} outside 0..{len(configs) - 1}"
        )
    cfg = configs[args.cap_index]
    net = init_network(cfg, fc, config_seed(args.seed, cfg.cap_index))
    grad = input_gradient(net, batch)
    positions, fd = sample_safe_positions(net, batch, args.positions,
                                          step=args.step, seed=args.seed)
    worst = 0.0
    for pos, approx in zip(positions, fd):
        exact = grad[pos]
        err = abs(approx - exact) / max(abs(approx), abs(exact), 1e-10)
        worst = max(worst, err)
    status = "ok" if worst < GRADCHECK_TOL else "FAIL"
    print(f"gradcheck cap_index={cfg.cap_index} positions={len(positions)} "
          f"step={args.step:g} max_rel_err={worst:.3e} [{status}]")
    if worst >= GRADCHECK_TOL:
        raise NumericalError(
            f"finite differences disagree with the input gradient: {worst:.3e}"
        )
    return 0


def _cmd_family(args) -> int:
    fc = _build_fc(args)
    print(f"backend: {backends.active_name()}")
    print(f"stages: {fc.stages}, input {fc.input_size[0]}x{fc.input_size[1]}, "
          f"in_channels {fc.in_channels}, classes {fc.out_classes}")
    for cfg in build_family(fc):
        print(f"i={cfg.cap_index} cap={cfg.cap} channels={list(cfg.channels)} "
              f"params={cfg.param_count}")
    return 0


_COMMANDS = {
    "select": _cmd_select,
    "curve": _cmd_curve,
    "gradcheck": _cmd_gradcheck,
    "family": _cmd_family,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
