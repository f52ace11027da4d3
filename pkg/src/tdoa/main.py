import argparse
import logging
from typing import List, Optional

from .config import get_config
from .errors import TdoaError, ValidationError, exit_code_for
from .handlers import presets, run, suite, validate

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    # Ошибки разбора аргументов дают тот же код возврата, что и ошибки конфигурации
    def error(self, message: str) -> None:
        raise ValidationError("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="run_tdoa.py", description="TDOA-локализация: прогоны оптимизаторов и сводки")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    # Регистрация команд
    run.add_parser(subparsers)
    suite.add_parser(subparsers)
    presets.add_parser(subparsers)
    validate.add_parser(subparsers)
    return parser


async def main(argv: Optional[List[str]] = None) -> int:
    config = get_config()

    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )

    try:
        args = build_parser().parse_args(argv)
        return await args.handler(args, config)
    except (TdoaError, OSError) as exc:
        code = exit_code_for(exc)
        logger.error(f"[CLI] {type(exc).__name__}: {exc} (exit {code})")
        return code
