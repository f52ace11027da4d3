import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.tdoa.errors import ConfigurationError, CovarianceError, ValidationError
from src.tdoa.services.measurement_model import ReceiverSet, factorize_covariance, pair_list
from src.tdoa.services.signal_frontend import SignalParams

logger = logging.getLogger(__name__)


class MeasurementSource(str, Enum):
    DIRECT = "direct"
    SIGNAL = "signal"

    @classmethod
    def parse(cls, tag: Union[str, "MeasurementSource"]) -> "MeasurementSource":
        if isinstance(tag, MeasurementSource):
            return tag
        normalized = str(tag).strip().lower()
        aliases = {"direct": cls.DIRECT, "direct-noise": cls.DIRECT, "signal": cls.SIGNAL, "signal-frontend": cls.SIGNAL}
        if normalized not in aliases:
            raise ConfigurationError(f"unknown measurement source '{tag}'")
        return aliases[normalized]


@dataclass(frozen=True)
class UniformCovariance:
    """Одинаковые диагональные и внедиагональные элементы C."""

    diag: float
    offdiag: float

    def matrix(self, size: int) -> np.ndarray:
        covariance = np.full((size, size), float(self.offdiag))
        np.fill_diagonal(covariance, float(self.diag))
        return covariance

    def as_dict(self) -> Dict[str, object]:
        return {"diag": self.diag, "offdiag": self.offdiag}


@dataclass(frozen=True, eq=False)
class MatrixCovariance:
    values: np.ndarray

    def matrix(self, size: int) -> np.ndarray:
        covariance = np.array(self.values, dtype=float)
        if covariance.shape != (size, size):
            raise CovarianceError(f"covariance matrix must be {size}×{size}, got {covariance.shape}")
        return covariance

    def as_dict(self) -> Dict[str, object]:
        return {"matrix": np.asarray(self.values, dtype=float).tolist()}


@dataclass(frozen=True)
class PerReceiverCovariance:
    """
    C из независимых шумов приёмников: ε_ij = n_i − n_j, n_i ~ N(0, σ_i²),
    плюс независимая систематическая ошибка пары π_ij ~ N(0, pair_sigma²).
    """

    sigmas: Tuple[float, ...]
    pair_sigma: float

    def matrix(self, size: int) -> np.ndarray:
        n = len(self.sigmas)
        pairs = pair_list(n)
        if len(pairs) != size:
            raise CovarianceError(f"{n} receiver sigmas give {len(pairs)} pairs, expected {size}")
        incidence = np.zeros((size, n))
        for m, (i, j) in enumerate(pairs):
            incidence[m, i] = 1.0
            incidence[m, j] = -1.0
        variances = np.asarray(self.sigmas, dtype=float) ** 2
        return incidence @ np.diag(variances) @ incidence.T + self.pair_sigma ** 2 * np.eye(size)

    def as_dict(self) -> Dict[str, object]:
        return {"per_receiver": {"sigmas": list(self.sigmas), "pair_sigma": self.pair_sigma}}


CovarianceSpec = Union[UniformCovariance, MatrixCovariance, PerReceiverCovariance]


def _point(value: Optional[Sequence[float]], field: str) -> Optional[np.ndarray]:
    if value is None:
        return None
    point = np.array(value, dtype=float)
    if point.shape != (2,) or not np.all(np.isfinite(point)):
        raise ValidationError(field, f"expected a finite 2-D point, got {value!r}")
    point.setflags(write=False)
    return point


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    receivers: ReceiverSet
    true_position: np.ndarray
    covariance: CovarianceSpec
    initial_position: Optional[np.ndarray] = None
    iterations: int = 300
    measurement_source: MeasurementSource = MeasurementSource.DIRECT
    signal: Optional[SignalParams] = None
    noise_free: bool = False
    resample_each_iteration: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.receivers, ReceiverSet):
            object.__setattr__(self, "receivers", ReceiverSet(self.receivers))
        object.__setattr__(self, "true_position", _point(self.true_position, "true_position"))
        object.__setattr__(self, "initial_position", _point(self.initial_position, "initial_position"))
        object.__setattr__(self, "measurement_source", MeasurementSource.parse(self.measurement_source))
        if isinstance(self.iterations, bool) or int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValidationError("iterations", f"must be a non-negative integer, got {self.iterations}")
        object.__setattr__(self, "iterations", int(self.iterations))
        if self.resample_each_iteration and self.measurement_source is MeasurementSource.SIGNAL:
            raise ValidationError("resample_each_iteration", "only supported for direct measurements")
        if self.resample_each_iteration and self.noise_free:
            raise ValidationError("resample_each_iteration", "cannot be combined with noise_free")
        # Ковариация проверяется сразу при построении сценария
        factorize_covariance(self.covariance_matrix())

    def covariance_matrix(self) -> np.ndarray:
        return self.covariance.matrix(self.receivers.pair_count)

    @property
    def start_position(self) -> np.ndarray:
        """p⁰: заданная начальная точка или центроид приёмников."""
        if self.initial_position is not None:
            return np.array(self.initial_position)
        return self.receivers.centroid

    @property
    def signal_params(self) -> SignalParams:
        return self.signal if self.signal is not None else SignalParams()

    def with_overrides(
        self,
        iterations: Optional[int] = None,
        measurement_source: Optional[Union[str, MeasurementSource]] = None,
    ) -> "Scenario":
        changes: Dict[str, object] = {}
        if iterations is not None:
            changes["iterations"] = iterations
        if measurement_source is not None:
            changes["measurement_source"] = MeasurementSource.parse(measurement_source)
        return replace(self, **changes) if changes else self


PRESET_RECEIVERS = ((0.0, 0.0), (10.0, 60.0), (70.0, 70.0), (60.0, 10.0))
PRESET_COVARIANCE = UniformCovariance(diag=0.4, offdiag=0.1)

PRESETS: Dict[str, Scenario] = {
    # Передатчик внутри выпуклой оболочки приёмников
    "scenario1": Scenario(
        name="scenario1",
        receivers=ReceiverSet(PRESET_RECEIVERS),
        true_position=(40.0, 80.0),
        covariance=PRESET_COVARIANCE,
    ),
    # Передатчик вне выпуклой оболочки
    "scenario2": Scenario(
        name="scenario2",
        receivers=ReceiverSet(PRESET_RECEIVERS),
        true_position=(75.0, 65.0),
        covariance=PRESET_COVARIANCE,
    ),
}


def get_preset(name: str) -> Scenario:
    scenario = PRESETS.get(name.strip().lower())
    if scenario is None:
        raise ConfigurationError(f"unknown scenario preset '{name}' (known: {', '.join(PRESETS)})")
    return scenario


def describe(scenario: Scenario) -> str:
    receivers = ", ".join(f"[{x:g}, {y:g}]" for x, y in scenario.receivers.positions)
    x, y = scenario.true_position
    return (
        f"{scenario.name}: receivers {receivers}; transmitter [{x:g}, {y:g}]; "
        f"K={scenario.iterations}; source={scenario.measurement_source.value}"
    )
