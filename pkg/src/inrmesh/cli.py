"""Command-line entry point.

Exit codes: 0 on success, 1 when arguments or inputs fail validation,
2 when a computation fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import driver, export, metrics, network, trainer
from .mesh import MeshTree

log = logging.getLogger("inrmesh")


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _slice_spec(text: str) -> tuple[int, float]:
    try:
        axis, value = text.split(":")
        return int(axis), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AXIS:VALUE, got {text!r}")


def _campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--inr", required=True, help="weight file")
    p.add_argument("--mode", required=True, choices=driver.MODES)
    p.add_argument("--T", type=float, help="pruned-network relative error threshold")
    p.add_argument("--P", type=float, help="kept-neuron proportion threshold")
    p.add_argument("--tau", type=float, help="interpolation error threshold (basic mode)")
    p.add_argument("--eps", type=float, default=1e-3, help="ID tolerance (default 1e-3)")
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--n-err", type=int, default=256)
    p.add_argument("--n-id", type=int, help="ID samples per element (default: widest hidden layer)")
    p.add_argument("--n-total-err", type=int, help="global RMSE samples (default 262144 in 2D, 1048576 otherwise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-uniform", type=int, help="uniform refinements before the first sweep (default 0 in 2D, 2 otherwise)")
    p.add_argument("--dof-budget", type=int)
    p.add_argument("--time-slices", type=_floats,
                   help="comma-separated t values; write --time-slices=-1,0,1 when the list starts negative")
    p.add_argument("--output-component", type=int)
    p.add_argument("--out", help="VTK output path (slice-run: output directory)")
    p.add_argument("--report", help="CSV report path")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--no-timing", action="store_true", help="write zero wall times so reports are reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inrmesh", description="Adaptive meshes from implicit neural representations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="refine a mesh and export it")
    _campaign_flags(run)
    run.add_argument("--slice", type=_slice_spec, action="append", default=[],
                     help="AXIS:VALUE cross-section to export (repeatable; required for 4D)")

    sl = sub.add_parser("slice-run", help="independent campaigns on time slices of a 4D INR")
    _campaign_flags(sl)

    nm = sub.add_parser("neuron-map", help="kept-neuron counts on a uniform mesh")
    nm.add_argument("--inr", required=True)
    nm.add_argument("--levels", type=int, default=3, help="uniform refinement levels")
    nm.add_argument("--eps", type=float, default=1e-3)
    nm.add_argument("--n-id", type=int)
    nm.add_argument("--seed", type=int, default=0)
    nm.add_argument("--output-component", type=int)
    nm.add_argument("--out", required=True)

    ft = sub.add_parser("fit", help="fit a small INR to a built-in target")
    ft.add_argument("--target", required=True, choices=sorted(trainer.TARGETS))
    ft.add_argument("--depth", type=int, default=4)
    ft.add_argument("--width", type=int, default=32)
    ft.add_argument("--activation", default="relu", choices=[a for a in network.ACTIVATIONS if a != "identity"])
    ft.add_argument("--fourier-features", type=int, default=0)
    ft.add_argument("--fourier-scale", type=float, default=1.0)
    ft.add_argument("--samples", type=int, default=4096)
    ft.add_argument("--detail-fraction", type=float, default=0.0,
                    help="share of training points drawn from the target's detail region")
    ft.add_argument("--epochs", type=int, default=2000)
    ft.add_argument("--lr", type=float, default=1e-3)
    ft.add_argument("--seed", type=int, default=0)
    ft.add_argument("--out", required=True)
    ft.add_argument("--log", help="epoch,loss CSV")

    rp = sub.add_parser("report", help="pretty-print a report CSV")
    rp.add_argument("--report", required=True)
    return parser


def _load(path, component) -> network.Mlp:
    if not Path(path).is_file():
        raise ValidationError(f"weight file not found: {path}")
    try:
        net = network.load_inr(path)
        if component is not None:
            net = dataclasses.replace(net, output_component=component)
    except network.WeightFileError as exc:
        raise ValidationError(str(exc))
    return net


def _run_config(args) -> driver.RunConfig:
    if args.mode == "pruning":
        for flag in ("T", "P"):
            if getattr(args, flag) is None:
                raise ValidationError(f"--mode pruning requires --{flag}")
        if args.tau is not None:
            raise ValidationError("--tau conflicts with --mode pruning (use --T/--P)")
    elif args.mode == "basic":
        if args.tau is None:
            raise ValidationError("--mode basic requires --tau")
        for flag in ("T", "P"):
            if getattr(args, flag) is not None:
                raise ValidationError(f"--{flag} conflicts with --mode basic (use --tau)")
    base = driver.RunConfig()
    try:
        return driver.RunConfig(
            mode=args.mode,
            T=base.T if args.T is None else args.T,
            P=base.P if args.P is None else args.P,
            tau=base.tau if args.tau is None else args.tau,
            eps=args.eps,
            K_max=args.kmax,
            n_err=args.n_err,
            n_ID=args.n_id,
            n_total_err=args.n_total_err,
            seed=args.seed,
            initial_uniform_levels=args.initial_uniform,
            time_slices=args.time_slices,
            dof_budget=args.dof_budget,
            threads=args.threads,
        )
    except ValueError as exc:
        raise ValidationError(str(exc))


def _echo_config(args, cfg: driver.RunConfig, net: network.Mlp, target_dir) -> None:
    doc = {
        "command": args.command,
        "inr": str(Path(args.inr).resolve()),
        "output_component": net.output_component,
        "config": dataclasses.asdict(cfg.resolve(net)),
        "out": args.out,
        "report": args.report,
        "slices": getattr(args, "slice", None),
        "no_timing": args.no_timing,
    }
    path = Path(target_dir) / "config.echo"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _cmd_run(args) -> None:
    cfg = _run_config(args)
    if cfg.time_slices:
        raise ValidationError("--time-slices conflicts with the run subcommand (use slice-run)")
    net = _load(args.inr, args.output_component)
    if net.input_dim == 4 and args.out and not args.slice:
        raise ValidationError("--out on a 4D INR requires at least one --slice AXIS:VALUE")
    for axis, value in args.slice:
        if not 0 <= axis < net.input_dim or net.input_dim < 3:
            raise ValidationError(f"--slice axis {axis} invalid for a {net.input_dim}D INR")
        if not net.domain.lo[axis] <= value <= net.domain.hi[axis]:
            raise ValidationError(f"--slice value {value} outside the domain on axis {axis}")
    anchor = args.out or args.report or "."
    _echo_config(args, cfg, net, Path(anchor).parent if args.out or args.report else anchor)

    campaign = driver.run_campaign(net, cfg)
    last = campaign.report[-1].iteration if campaign.report else 0
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if net.input_dim in (2, 3):
            export.export_vtk(campaign.mesh, campaign.vertex_values, out)
        for axis, value in args.slice:
            name = export.output_filename(out.stem, cfg.mode, last, axis, value)
            export.export_slice(campaign.mesh, net, axis, value, out.parent / name)
    if args.report:
        metrics.write_report(campaign.report, args.report, include_timing=not args.no_timing)
    print(metrics.format_report(campaign.report))


def _cmd_slice_run(args) -> None:
    cfg = _run_config(args)
    if not cfg.time_slices:
        raise ValidationError("slice-run requires --time-slices")
    net = _load(args.inr, args.output_component)
    if net.input_dim != 4:
        raise ValidationError(f"slice-run needs a 4D INR, got {net.input_dim}D")
    lo, hi = net.domain.lo[-1], net.domain.hi[-1]
    for t in cfg.time_slices:
        if not lo <= t <= hi:
            raise ValidationError(f"time slice {t} outside [{lo}, {hi}]")
    out_dir = Path(args.out or ".")
    _echo_config(args, cfg, net, out_dir)
    run_name = Path(args.inr).stem
    for sc in driver.run_time_slices(net, cfg):
        c = sc.campaign
        last = c.report[-1].iteration if c.report else 0
        export.export_vtk(c.mesh, c.vertex_values, out_dir / export.output_filename(run_name, cfg.mode, last, 3, sc.t))
        if args.report:
            rp = Path(args.report)
            path = rp.with_name(f"{rp.stem}_t{sc.t:g}{rp.suffix}")
            metrics.write_report(c.report, path, include_timing=not args.no_timing)
        print(f"t = {sc.t:g}")
        print(metrics.format_report(c.report))


def _cmd_neuron_map(args) -> None:
    net = _load(args.inr, args.output_component)
    if net.input_dim not in (2, 3):
        raise ValidationError("neuron-map exports 2D or 3D meshes only")
    if args.levels < 0 or not args.eps > 0:
        raise ValidationError("--levels must be >= 0 and --eps positive")
    mesh = MeshTree(net.domain)
    mesh.refine_uniform(args.levels)
    counts = driver.neuron_count_map(net, mesh, args.eps, args.n_id, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    export.export_cell_scalars(mesh, counts, args.out)
    print(f"{mesh.leaf_count} cells, kept neurons min {counts.min()} max {counts.max()} of {net.num_neurons}")


def _cmd_fit(args) -> None:
    try:
        spec = trainer.FitSpec(
            target=args.target,
            depth=args.depth,
            width=args.width,
            activation=args.activation,
            fourier_features=args.fourier_features,
            fourier_scale=args.fourier_scale,
            sample_count=args.samples,
            detail_fraction=args.detail_fraction,
            epochs=args.epochs,
            learning_rate=args.lr,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ValidationError(str(exc))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    _, err = trainer.fit(spec, path=args.out, log_path=args.log)
    print(f"held-out RMSE {err:.6g}; weights written to {args.out}")


def _cmd_report(args) -> None:
    if not Path(args.report).is_file():
        raise ValidationError(f"report not found: {args.report}")
    try:
        records = metrics.read_report(args.report)
    except ValueError as exc:
        raise ValidationError(str(exc))
    print(metrics.format_report(records))


COMMANDS = {
    "run": _cmd_run,
    "slice-run": _cmd_slice_run,
    "neuron-map": _cmd_neuron_map,
    "fit": _cmd_fit,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        print(f"inrmesh: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"inrmesh: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"inrmesh: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
