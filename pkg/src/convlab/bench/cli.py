from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from ..core.models import AlgoConfig, Algorithm
from ..errors import ConvLabError, UsageError
from ..ir.lower import lower
from ..ir.text import pipeline_text
from ..settings import Settings, load_settings, save_settings
from ..sim.machine import load_machine
from ..tune.search import SearchSpace, tune
from .layers import DEPTHS, RESNET_LAYERS, LayerSpec, layer, network_cycles
from .report import (
    REPORT_ALGORITHMS,
    build_report,
    default_config,
    mib,
    tuned_configs,
    write_plot_data,
    write_report,
)
from .verify import verify

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _algorithm(name: str) -> Algorithm:
    try:
        return Algorithm(name)
    except ValueError:
        choices = ", ".join(a.value for a in Algorithm if a is not Algorithm.ORACLE)
        raise UsageError(f"unknown algorithm {name!r}; choose from {choices}") from None


def _layers(names: list[str] | None) -> list[LayerSpec]:
    return [layer(n) for n in names] if names else list(RESNET_LAYERS)


def _algorithms(names: list[str] | None) -> list[Algorithm]:
    return [_algorithm(n) for n in names] if names else list(REPORT_ALGORITHMS)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed for operands")
    common.add_argument("--scale", type=int, help="channel count for simulated and verified layers")
    common.add_argument("--machine", help="dedicated, integrated, embedded or a key=value file")
    common.add_argument("--depth", type=int, help="global loads kept in flight per warp")
    common.add_argument("--workers", type=int, help="concurrent simulations")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="convlab", description="Convolution algorithms on a simulated GPU")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="check every algorithm against the oracle")
    p.add_argument("--layers", nargs="+")
    p.add_argument("--algorithms", nargs="+")
    p.add_argument("--ir", action="store_true", help="run the lowered kernels in the interpreter")

    p = sub.add_parser("report", parents=[common], help="simulate layers and write the profile CSV")
    p.add_argument("--layers", nargs="+")
    p.add_argument("--algorithms", nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--plot", type=Path, help="also write layer,algorithm,cycles plot data")
    p.add_argument("--tune", action="store_true", help="rank tuned configurations instead of the stock ones")

    p = sub.add_parser("tune", parents=[common], help="search configurations for the fewest cycles")
    p.add_argument("algorithm")
    p.add_argument("--layer", default="conv4.x")
    p.add_argument("--out", type=Path, help="audit CSV, one row per trial")
    p.add_argument("--rectangular", action="store_true", help="also try tiles with tile_x != tile_y")

    p = sub.add_parser("dump-ir", parents=[common], help="print the lowered kernels")
    p.add_argument("algorithm")
    p.add_argument("--layer", default="conv4.x")
    p.add_argument("--tile", type=int, help="square spatial tile")
    p.add_argument("--ocpt", type=int, help="output channels per thread")
    p.add_argument("--wg", type=int, help="ILP-M workgroup width")
    p.add_argument("--transpose", action="store_true", help="ILP-M transposed output store")
    p.add_argument("--out", type=Path)

    sub.add_parser("settings", parents=[common], help="show defaults; flags given here are saved")
    return parser


def _resolve(args: argparse.Namespace, settings: Settings) -> argparse.Namespace:
    for name in ("seed", "scale", "machine", "workers"):
        if getattr(args, name) is None:
            setattr(args, name, getattr(settings, name))
    if args.depth is None:
        args.depth = settings.pipeline_depth
    return args


def setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def cmd_verify(args: argparse.Namespace, console: Console) -> None:
    results = verify(args.seed, args.scale, _layers(args.layers), _algorithms(args.algorithms), via_ir=args.ir)
    worst: dict[Algorithm, float] = {}
    for r in results:
        worst[r.algorithm] = max(worst.get(r.algorithm, 0.0), r.error)
    table = Table(title=f"max relative error, scale {args.scale}, seed {args.seed}")
    table.add_column("algorithm")
    table.add_column("error", justify="right")
    for algorithm, error in worst.items():
        table.add_row(algorithm.value, f"{error:.3e}")
    console.print(table)


def cmd_report(args: argparse.Namespace, console: Console) -> None:
    machine = load_machine(args.machine)
    layers, algorithms = _layers(args.layers), _algorithms(args.algorithms)
    configs = None
    if args.tune:
        configs = tuned_configs(layers, algorithms, [machine], args.scale, SearchSpace(), args.workers, args.depth)
    rows = build_report(layers, algorithms, [machine], args.scale, args.workers, args.depth, configs)
    write_report(rows, args.out)
    logger.info("wrote %d rows to %s", len(rows), args.out)
    if args.plot:
        write_plot_data(rows, args.plot)
    table = Table(title=f"{machine.name}, scale {args.scale}")
    for name in ("layer", "algorithm", "read MiB", "post-L2 MiB", "write MiB", "barriers", "cycles"):
        table.add_column(name, justify="left" if name in ("layer", "algorithm") else "right")
    for row in rows:
        m = row.metrics
        table.add_row(row.layer, row.config.algorithm.value, mib(m.global_read_bytes_raw),
                      mib(m.global_read_bytes_post_l2), mib(m.global_write_bytes),
                      str(m.barrier_count), str(m.cycles))
    console.print(table)

    by_algorithm: dict[str, dict[str, int]] = {}
    for row in rows:
        by_algorithm.setdefault(row.config.algorithm.value, {})[row.layer] = row.metrics.cycles
    complete = {a: c for a, c in by_algorithm.items() if len(c) == len(RESNET_LAYERS)}
    if complete:
        totals = Table(title="3x3 convolution cycles per forward pass")
        totals.add_column("algorithm")
        for depth in DEPTHS:
            totals.add_column(f"ResNet-{depth}", justify="right")
        for algorithm, cycles in complete.items():
            totals.add_row(algorithm, *(str(network_cycles(d, cycles)) for d in DEPTHS))
        console.print(totals)


def cmd_tune(args: argparse.Namespace, console: Console) -> None:
    machine = load_machine(args.machine)
    shape = layer(args.layer).shape(args.scale)
    result = tune(_algorithm(args.algorithm), shape, machine, SearchSpace(square_tiles=not args.rectangular),
                  args.workers, args.depth)
    if args.out:
        result.write_audit(args.out)
    console.print(f"best: {result.best.label()}  cycles={result.best_metrics.cycles}")
    skipped = sum(1 for t in result.trials if t.skipped)
    console.print(f"{len(result.trials)} trials, {skipped} skipped")


def cmd_dump_ir(args: argparse.Namespace, console: Console) -> None:
    shape = layer(args.layer).shape(args.scale)
    cfg: AlgoConfig = default_config(_algorithm(args.algorithm), shape)
    if args.tile:
        cfg = replace(cfg, tile_x=args.tile, tile_y=args.tile)
    if args.ocpt:
        cfg = replace(cfg, out_channels_per_thread=args.ocpt)
    if args.wg:
        cfg = replace(cfg, workgroup_channels=args.wg)
    if args.transpose:
        cfg = replace(cfg, transpose_output=True)
    machine = load_machine(args.machine)
    text = pipeline_text(lower(cfg, shape, machine.max_workgroup))
    if args.out:
        args.out.write_text(text)
    else:
        console.print(text, markup=False, highlight=False, soft_wrap=True, end="")


def cmd_settings(args: argparse.Namespace, console: Console, settings: Settings) -> None:
    changed = False
    for name, flag in (("seed", "seed"), ("scale", "scale"), ("machine", "machine"),
                       ("workers", "workers"), ("pipeline_depth", "depth")):
        value = getattr(args, flag)
        if value is not None and value != getattr(settings, name):
            setattr(settings, name, value)
            changed = True
    if changed:
        load_machine(settings.machine)
        save_settings(settings)
    table = Table(title="settings" + (" (saved)" if changed else ""))
    table.add_column("name")
    table.add_column("value", justify="right")
    for name, value in vars(settings).items():
        table.add_row(name, str(value))
    console.print(table)


_COMMANDS = {
    "verify": cmd_verify,
    "report": cmd_report,
    "tune": cmd_tune,
    "dump-ir": cmd_dump_ir,
}


def run(argv: list[str] | None = None) -> int:
    console = Console()
    errors = Console(stderr=True)
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.verbose)
        settings = load_settings()
        if args.command == "settings":
            cmd_settings(args, console, settings)
        else:
            _COMMANDS[args.command](_resolve(args, settings), console)
    except ConvLabError as exc:
        errors.print(f"error: {exc.kind}: {exc}", markup=False, highlight=False, soft_wrap=True)
        return exc.exit_code
    return 0
