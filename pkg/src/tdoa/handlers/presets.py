import argparse
import logging

from src.tdoa.config import TdoaConfig
from src.tdoa.errors import EXIT_OK
from src.tdoa.services.optimizers import ALL_ALGORITHMS, OptimizerConfig
from src.tdoa.services.scenarios import PRESETS, describe
from src.tdoa.storage.config_file import dump_config

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("presets", help="встроенные сценарии")
    parser.add_argument("--json", action="store_true", help="печатать полный документ конфигурации пресета")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: TdoaConfig) -> int:
    for scenario in PRESETS.values():
        if args.json:
            print(dump_config(scenario, [OptimizerConfig(algorithm) for algorithm in ALL_ALGORITHMS]), end="")
        else:
            print(describe(scenario))
    return EXIT_OK
