import argparse
import logging
from functools import partial

from src.tdoa.config import TdoaConfig
from src.tdoa.errors import EXIT_OK, RunFailure
from src.tdoa.handlers.common import add_run_arguments, build_run_spec, write_file, write_text_file
from src.tdoa.plots.svg import PlotKind, emit_svg
from src.tdoa.services.harness import evaluate_claims, run_suite
from src.tdoa.storage.summary import write_claims, write_summary, write_thresholds
from src.tdoa.storage.traces import emit_csv

logger = logging.getLogger(__name__)

# Число seed по умолчанию для медианных оценок
DEFAULT_SEED_COUNT = 30


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("suite", help="все сочетания сценарий × алгоритм × seed со сводкой")
    add_run_arguments(parser)
    parser.add_argument("--workers", type=int, help="число одновременных прогонов")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: TdoaConfig) -> int:
    spec = build_run_spec(
        args,
        config,
        default_scenario="scenario1,scenario2",
        default_algo="all",
        default_seeds=range(config.default_seed, config.default_seed + DEFAULT_SEED_COUNT),
        default_emit=("summary", "svg"),
    )
    keep_traces = bool({"csv", "svg"} & spec.emit)
    summary = await run_suite(
        spec.scenarios,
        spec.configs,
        spec.seeds,
        checkpoints=config.checkpoints,
        error_threshold=config.error_threshold,
        workers=args.workers,
        keep_traces=keep_traces,
    )

    for cell in summary.cells:
        row = "  ".join(
            f"k={stats.checkpoint}: {stats.median:.3f} m" if stats.median is not None else f"k={stats.checkpoint}: -"
            for stats in cell.checkpoints
        )
        crossing = "not-reached" if cell.threshold.median is None else f"{cell.threshold.median:g}"
        print(f"{cell.scenario} {cell.algorithm.value:<10} {row}  iterations to {cell.threshold.threshold:g} m: {crossing}")

    if "csv" in spec.emit:
        ordered = sorted(summary.traces.items(), key=lambda item: (item[0][0], item[0][1].slug, item[0][2]))
        for (scenario, algorithm, seed), trace in ordered:
            write_file(spec.out_dir / f"{scenario}_{algorithm.slug}_seed{seed}.csv", partial(emit_csv, trace))

    if "svg" in spec.emit:
        first_seed = summary.seeds[0]
        for scenario in spec.scenarios:
            traces = [
                summary.traces[(scenario.name, optimizer.algorithm, first_seed)]
                for optimizer in spec.configs
                if (scenario.name, optimizer.algorithm, first_seed) in summary.traces
            ]
            if any(len(trace) for trace in traces):
                write_file(
                    spec.out_dir / f"{scenario.name}_{PlotKind.CONVERGENCE.value}.svg",
                    partial(emit_svg, traces, PlotKind.CONVERGENCE, scenario=scenario),
                )

    if "summary" in spec.emit:
        claims = evaluate_claims(summary)
        for claim in claims:
            logger.info(f"[SUITE] claim {claim.name}: {'pass' if claim.passed else 'fail'} ({claim.detail})")
        write_text_file(spec.out_dir / "summary.csv", partial(write_summary, summary))
        write_text_file(spec.out_dir / "thresholds.csv", partial(write_thresholds, summary))
        write_text_file(spec.out_dir / "claims.csv", partial(write_claims, claims))

    if summary.failed_runs:
        raise RunFailure(f"{summary.failed_runs} run(s) failed, summaries written to {spec.out_dir}")
    return EXIT_OK
