"""
Правила обновления первого порядка над (позиция, градиент).

Все шаги чистые: возвращают новое состояние и увеличивают счётчик итераций ровно на 1.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, Sequence, Union

import numpy as np

from src.tdoa.errors import ConfigurationError, InvalidArgumentError, NumericError, ValidationError

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    SGD = "SGD"
    SGD_MOMENTUM = "SGD+M"
    RMSPROP = "RMSProp"
    ADAM = "Adam"
    RMSPROP_AF = "RMSProp+AF"

    @classmethod
    def parse(cls, tag: Union[str, "Algorithm"]) -> "Algorithm":
        if isinstance(tag, Algorithm):
            return tag
        algorithm = _ALIASES.get(str(tag).strip().lower())
        if algorithm is None:
            raise ConfigurationError(f"unknown algorithm '{tag}'")
        return algorithm

    @property
    def slug(self) -> str:
        """Имя для файлов: sgd, sgdm, rmsprop, adam, rmspropaf."""
        return self.value.lower().replace("+", "")


_ALIASES: Dict[str, Algorithm] = {
    "sgd": Algorithm.SGD,
    "sgd+m": Algorithm.SGD_MOMENTUM,
    "sgdm": Algorithm.SGD_MOMENTUM,
    "sgd-m": Algorithm.SGD_MOMENTUM,
    "rmsprop": Algorithm.RMSPROP,
    "adam": Algorithm.ADAM,
    "rmsprop+af": Algorithm.RMSPROP_AF,
    "rmsprop-af": Algorithm.RMSPROP_AF,
    "rmspropaf": Algorithm.RMSPROP_AF,
}

ALL_ALGORITHMS = tuple(Algorithm)


@dataclass(frozen=True)
class OptimizerConfig:
    # Значения по умолчанию: таблица параметров моделирования
    algorithm: Algorithm
    learning_rate: float = 0.01
    momentum: float = 0.9
    decay: float = 0.999
    decay1: float = 0.9
    decay2: float = 0.999
    decay_threshold: float = 0.99
    smoothing: float = 1e-6
    buffer_size: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate", f"must be > 0, got {self.learning_rate}")
        if not self.smoothing > 0:
            raise ValidationError("smoothing", f"must be > 0, got {self.smoothing}")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum", f"must be in [0, 1), got {self.momentum}")
        for name in ("decay", "decay1", "decay2", "decay_threshold"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValidationError(name, f"must be in (0, 1), got {value}")
        if isinstance(self.buffer_size, bool) or int(self.buffer_size) != self.buffer_size or self.buffer_size < 1:
            raise ValidationError("buffer_size", f"must be a positive integer, got {self.buffer_size}")

    def as_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm.value,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "decay": self.decay,
            "decay1": self.decay1,
            "decay2": self.decay2,
            "decay_threshold": self.decay_threshold,
            "smoothing": self.smoothing,
            "buffer_size": int(self.buffer_size),
        }


@dataclass(frozen=True, eq=False)
class OptimizerState:
    position: np.ndarray
    iteration: int
    velocity: np.ndarray
    accumulator: np.ndarray
    first_moment: np.ndarray
    # Строка 0: b_x, строка 1: b_y
    buffers: np.ndarray
    current_rho: np.ndarray

    @property
    def populated(self) -> int:
        return min(self.iteration, self.buffers.shape[1])


def init_state(position: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    return OptimizerState(
        position=np.array(position, dtype=float),
        iteration=0,
        velocity=np.zeros(2),
        accumulator=np.zeros(2),
        first_moment=np.zeros(2),
        buffers=np.zeros((2, int(config.buffer_size))),
        current_rho=np.full(2, config.decay_threshold),
    )


def _checked(gradient: Sequence[float]) -> np.ndarray:
    g = np.asarray(gradient, dtype=float)
    if g.shape != (2,):
        raise InvalidArgumentError(f"gradient must be a 2-vector, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient {g}")
    return g


def _require(config: OptimizerConfig, algorithm: Algorithm) -> None:
    if config.algorithm is not algorithm:
        raise ConfigurationError(f"{algorithm.value} step called with {config.algorithm.value} config")


def sgd_step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    """p ← p − μ·g."""
    _require(config, Algorithm.SGD)
    g = _checked(gradient)
    return replace(
        state,
        position=state.position - config.learning_rate * g,
        iteration=state.iteration + 1,
    )


def sgd_momentum_step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    """v ← α·v − μ·g; p ← p + v."""
    _require(config, Algorithm.SGD_MOMENTUM)
    g = _checked(gradient)
    velocity = config.momentum * state.velocity - config.learning_rate * g
    return replace(
        state,
        position=state.position + velocity,
        velocity=velocity,
        iteration=state.iteration + 1,
    )


def rmsprop_step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    """r ← ρ·r + (1−ρ)·g⊙g; p ← p − μ/(δ+√r)⊙g."""
    _require(config, Algorithm.RMSPROP)
    g = _checked(gradient)
    accumulator = config.decay * state.accumulator + (1.0 - config.decay) * g * g
    return replace(
        state,
        position=state.position - config.learning_rate / (config.smoothing + np.sqrt(accumulator)) * g,
        accumulator=accumulator,
        iteration=state.iteration + 1,
    )


def adam_step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    _require(config, Algorithm.ADAM)
    g = _checked(gradient)
    t = state.iteration + 1
    first_moment = config.decay1 * state.first_moment + (1.0 - config.decay1) * g
    accumulator = config.decay2 * state.accumulator + (1.0 - config.decay2) * g * g
    # Коррекция смещения
    m_hat = first_moment / (1.0 - config.decay1 ** t)
    r_hat = accumulator / (1.0 - config.decay2 ** t)
    return replace(
        state,
        position=state.position - config.learning_rate * m_hat / (config.smoothing + np.sqrt(r_hat)),
        first_moment=first_moment,
        accumulator=accumulator,
        iteration=t,
    )


def buffer_index(k: int, buffer_size: int) -> int:
    """Индекс кольцевого буфера k' = k − L·⌊(k−1)/L⌋, значения 1..L."""
    if k < 1 or buffer_size < 1:
        raise InvalidArgumentError(f"buffer_index needs k >= 1 and L >= 1, got k={k}, L={buffer_size}")
    return k - buffer_size * ((k - 1) // buffer_size)


def adaptive_rho(buffers: Sequence[Sequence[float]], rho0: Union[float, Sequence[float]]) -> np.ndarray:
    """
    Адаптивный коэффициент затухания по заполненным элементам буферов.

    γ = (v_max − v_min) ⊘ (v_max + v_min + 1), ρ = max(ρ⁰, γ) поосно.
    """
    b = np.asarray(buffers, dtype=float)
    if b.ndim != 2 or b.shape[0] != 2 or b.shape[1] == 0:
        raise InvalidArgumentError(f"expected two non-empty buffers, got shape {b.shape}")
    v_max = b.max(axis=1)
    v_min = b.min(axis=1)
    gamma = (v_max - v_min) / (v_max + v_min + 1.0)
    return np.maximum(np.broadcast_to(np.asarray(rho0, dtype=float), (2,)), gamma)


def rmsprop_af_step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    _require(config, Algorithm.RMSPROP_AF)
    g = _checked(gradient)
    k = state.iteration + 1
    squared = g * g

    buffers = state.buffers.copy()
    buffers[:, buffer_index(k, buffers.shape[1]) - 1] = squared
    # До заполнения буфера учитываются только k записанных элементов
    populated = min(k, buffers.shape[1])
    rho = adaptive_rho(buffers[:, :populated], config.decay_threshold)

    accumulator = rho * state.accumulator + (1.0 - rho) * squared
    return replace(
        state,
        position=state.position - config.learning_rate / (config.smoothing + np.sqrt(accumulator)) * g,
        accumulator=accumulator,
        buffers=buffers,
        current_rho=rho,
        iteration=k,
    )


StepFunction = Callable[[OptimizerState, Sequence[float], OptimizerConfig], OptimizerState]

_STEPS: Dict[Algorithm, StepFunction] = {
    Algorithm.SGD: sgd_step,
    Algorithm.SGD_MOMENTUM: sgd_momentum_step,
    Algorithm.RMSPROP: rmsprop_step,
    Algorithm.ADAM: adam_step,
    Algorithm.RMSPROP_AF: rmsprop_af_step,
}


def step(state: OptimizerState, gradient: Sequence[float], config: OptimizerConfig) -> OptimizerState:
    step_function = _STEPS.get(config.algorithm)
    if step_function is None:
        raise ConfigurationError(f"no update rule for algorithm '{config.algorithm}'")
    return step_function(state, gradient, config)
