import os
from dataclasses import dataclass
from typing import List
from dotenv import load_dotenv

# Загружаем переменные окружения из .env файла
load_dotenv()


@dataclass
class TdoaConfig:
    log_level: str
    out_dir: str
    workers: int
    default_seed: int
    checkpoints: List[int]
    error_threshold: float


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if not value:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def get_config() -> TdoaConfig:
    """Получает конфигурацию из переменных окружения или использует значения по умолчанию."""
    DEFAULT_LOG_LEVEL = "INFO"
    DEFAULT_OUT_DIR = "out"
    DEFAULT_WORKERS = 4
    DEFAULT_SEED = 0
    # Контрольные итерации для медиан ошибки (как на графиках сходимости)
    DEFAULT_CHECKPOINTS = [50, 150, 300]
    DEFAULT_ERROR_THRESHOLD = 3.5

    log_level = os.getenv("LOG_LEVEL", DEFAULT_LOG_LEVEL)
    out_dir = os.getenv("TDOA_OUT_DIR", DEFAULT_OUT_DIR)

    workers = _int_env("TDOA_WORKERS", DEFAULT_WORKERS)
    if workers < 1:
        workers = DEFAULT_WORKERS

    default_seed = _int_env("TDOA_DEFAULT_SEED", DEFAULT_SEED)

    checkpoints_str = os.getenv("TDOA_CHECKPOINTS")
    if checkpoints_str:
        try:
            checkpoints = sorted({int(k.strip()) for k in checkpoints_str.split(",") if k.strip()})
        except ValueError:
            checkpoints = DEFAULT_CHECKPOINTS
        if not checkpoints or checkpoints[0] < 0:
            checkpoints = DEFAULT_CHECKPOINTS
    else:
        checkpoints = DEFAULT_CHECKPOINTS

    threshold_str = os.getenv("TDOA_ERROR_THRESHOLD")
    error_threshold = DEFAULT_ERROR_THRESHOLD
    if threshold_str:
        try:
            error_threshold = float(threshold_str)
        except ValueError:
            error_threshold = DEFAULT_ERROR_THRESHOLD
        if not error_threshold > 0:
            error_threshold = DEFAULT_ERROR_THRESHOLD

    return TdoaConfig(
        log_level=log_level,
        out_dir=out_dir,
        workers=workers,
        default_seed=default_seed,
        checkpoints=checkpoints,
        error_threshold=error_threshold,
    )
