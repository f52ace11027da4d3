import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable, FrozenSet, List, Optional, Sequence, TextIO, Tuple

from src.tdoa.config import TdoaConfig
from src.tdoa.errors import ValidationError
from src.tdoa.services.optimizers import ALL_ALGORITHMS, Algorithm, OptimizerConfig
from src.tdoa.services.scenarios import PRESETS, Scenario, get_preset
from src.tdoa.storage.config_file import parse_config

logger = logging.getLogger(__name__)

EMIT_FLAGS = ("csv", "svg", "summary")


@dataclass(frozen=True)
class RunSpec:
    """Что запускать и куда писать результаты."""

    scenario_ref: str
    scenarios: Tuple[Scenario, ...]
    configs: Tuple[OptimizerConfig, ...]
    seeds: Tuple[int, ...]
    out_dir: Path
    emit: FrozenSet[str]


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="имя пресета (scenario1, scenario2) или путь к файлу конфигурации")
    parser.add_argument("--algo", help="алгоритм, список через запятую или all")
    parser.add_argument("--seed", type=int, help="один seed")
    parser.add_argument("--seeds", help="диапазон seed a..b (включительно)")
    parser.add_argument("--iterations", type=int, help="число итераций K")
    parser.add_argument("--out", help="каталог для результатов")
    parser.add_argument("--emit", help="что писать: csv,svg,summary")
    parser.add_argument("--measurement-source", choices=("direct", "signal"), help="источник измерений")


def parse_seeds(text: str) -> List[int]:
    """'7' → [7], '0..29' → [0, 1, ..., 29]."""
    text = text.strip()
    try:
        if ".." in text:
            first, last = (int(part) for part in text.split("..", 1))
        else:
            first = last = int(text)
    except ValueError as exc:
        raise ValidationError("--seeds", f"expected <n> or <a..b>, got '{text}'") from exc
    if first < 0 or last < first:
        raise ValidationError("--seeds", f"empty or negative range '{text}'")
    return list(range(first, last + 1))


def parse_emit(text: Optional[str], default: Sequence[str]) -> FrozenSet[str]:
    if text is None:
        return frozenset(default)
    flags = {flag.strip().lower() for flag in text.split(",") if flag.strip()}
    unknown = sorted(flags - set(EMIT_FLAGS))
    if unknown:
        raise ValidationError("--emit", f"unknown flag '{unknown[0]}' (known: {', '.join(EMIT_FLAGS)})")
    return frozenset(flags)


def load_scenario(ref: str) -> Tuple[Scenario, List[OptimizerConfig]]:
    """Пресет по имени или документ конфигурации по пути."""
    if ref.strip().lower() in PRESETS:
        return get_preset(ref), []
    text = Path(ref).read_text(encoding="utf-8")
    scenario, configs = parse_config(text)
    logger.info(f"[CONFIG] {ref}: scenario {scenario.name}, {len(configs)} optimizer(s)")
    return scenario, configs


def select_configs(algo: Optional[str], from_file: Sequence[OptimizerConfig], default: str) -> List[OptimizerConfig]:
    """Выбор оптимизаторов; параметры из файла конфигурации имеют приоритет над значениями по умолчанию."""
    known = {config.algorithm: config for config in from_file}
    if algo is None:
        if from_file:
            return list(from_file)
        algo = default
    if algo.strip().lower() == "all":
        algorithms = list(ALL_ALGORITHMS)
    else:
        algorithms = [Algorithm.parse(tag) for tag in algo.split(",") if tag.strip()]
    if len(set(algorithms)) != len(algorithms):
        raise ValidationError("--algo", f"duplicate algorithm in '{algo}'")
    return [known.get(algorithm) or OptimizerConfig(algorithm) for algorithm in algorithms]


def build_run_spec(
    args: argparse.Namespace,
    config: TdoaConfig,
    default_scenario: str,
    default_algo: str,
    default_seeds: Sequence[int],
    default_emit: Sequence[str],
) -> RunSpec:
    if args.seed is not None and args.seeds is not None:
        raise ValidationError("--seed", "use either --seed or --seeds")
    if args.seed is not None:
        if args.seed < 0:
            raise ValidationError("--seed", "must be >= 0")
        seeds = [args.seed]
    elif args.seeds is not None:
        seeds = parse_seeds(args.seeds)
    else:
        seeds = list(default_seeds)
    if args.iterations is not None and args.iterations < 0:
        raise ValidationError("--iterations", "must be >= 0")

    scenario_ref = args.scenario or default_scenario
    scenarios: List[Scenario] = []
    file_configs: List[OptimizerConfig] = []
    for ref in (part.strip() for part in scenario_ref.split(",") if part.strip()):
        scenario, configs = load_scenario(ref)
        scenarios.append(scenario.with_overrides(args.iterations, args.measurement_source))
        file_configs = file_configs or configs

    return RunSpec(
        scenario_ref=scenario_ref,
        scenarios=tuple(scenarios),
        configs=tuple(select_configs(args.algo, file_configs, default_algo)),
        seeds=tuple(seeds),
        out_dir=Path(args.out or config.out_dir),
        emit=parse_emit(args.emit, default_emit),
    )


def write_file(path: Path, writer: Callable[[BinaryIO], None]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as sink:
        writer(sink)
    logger.info(f"[EMIT] {path}")
    return path


def write_text_file(path: Path, writer: Callable[[TextIO], None]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as sink:
        writer(sink)
    logger.info(f"[EMIT] {path}")
    return path
