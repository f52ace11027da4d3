import argparse
import logging
from pathlib import Path

from src.tdoa.config import TdoaConfig
from src.tdoa.errors import EXIT_OK
from src.tdoa.storage.config_file import dump_config, parse_config

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("validate", help="только разбор и проверка файла конфигурации")
    parser.add_argument("path", help="путь к файлу конфигурации")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: TdoaConfig) -> int:
    """Печатает каноническую форму документа; ошибки разбора дают код возврата 1."""
    scenario, configs = parse_config(Path(args.path).read_text(encoding="utf-8"))
    logger.info(f"[CONFIG] {args.path}: valid, scenario {scenario.name}")
    print(dump_config(scenario, configs), end="")
    return EXIT_OK
