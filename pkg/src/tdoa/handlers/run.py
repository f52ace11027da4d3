import argparse
import asyncio
import logging
from functools import partial

from src.tdoa.config import TdoaConfig
from src.tdoa.errors import EXIT_OK, RunFailure, ValidationError
from src.tdoa.handlers.common import add_run_arguments, build_run_spec, write_file
from src.tdoa.plots.svg import PlotKind, emit_svg
from src.tdoa.services.harness import run
from src.tdoa.storage.traces import emit_csv

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("run", help="один сценарий, один seed; трасса в CSV и графики SVG")
    add_run_arguments(parser)
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: TdoaConfig) -> int:
    spec = build_run_spec(
        args,
        config,
        default_scenario="scenario1",
        default_algo="RMSProp+AF",
        default_seeds=[config.default_seed],
        default_emit=("csv", "svg"),
    )
    if len(spec.scenarios) != 1:
        raise ValidationError("--scenario", "run takes a single scenario; use suite for several")
    if len(spec.seeds) != 1:
        raise ValidationError("--seeds", "run takes a single seed; use suite for a seed range")
    scenario = spec.scenarios[0]
    seed = spec.seeds[0]

    logger.info(
        f"[RUN] {scenario.name} seed={seed} K={scenario.iterations} "
        f"algorithms={[c.algorithm.value for c in spec.configs]}"
    )
    traces = []
    for optimizer in spec.configs:
        trace = await asyncio.to_thread(run, scenario, optimizer, seed)
        traces.append(trace)
        status = "ok" if trace.ok else f"FAILED ({trace.failure})"
        print(f"{scenario.name} {optimizer.algorithm.value:<10} seed={seed} final error {trace.final_error:.4f} m {status}")

    if "csv" in spec.emit:
        for trace in traces:
            name = f"{scenario.name}_{trace.algorithm.slug}_seed{seed}.csv"
            write_file(spec.out_dir / name, partial(emit_csv, trace))
    if "svg" in spec.emit and any(len(trace) for trace in traces):
        for kind in PlotKind:
            name = f"{scenario.name}_seed{seed}_{kind.value}.svg"
            write_file(spec.out_dir / name, partial(emit_svg, traces, kind, scenario=scenario))

    failed = [trace for trace in traces if not trace.ok]
    if failed:
        raise RunFailure(f"{len(failed)} of {len(traces)} run(s) failed, outputs written to {spec.out_dir}")
    return EXIT_OK
