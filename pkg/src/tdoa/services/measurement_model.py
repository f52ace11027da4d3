import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.tdoa.errors import CovarianceError, InvalidArgumentError, SingularityError, ValidationError

if TYPE_CHECKING:
    from src.tdoa.services.scenarios import Scenario

logger = logging.getLogger(__name__)

# Радиус вокруг приёмника, внутри которого градиент не определён (м)
GUARD_RADIUS = 1e-9
SYMMETRY_TOLERANCE = 1e-9
INVERSE_TOLERANCE = 1e-8


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Лексикографический номер m пары (i, j), нумерация с 1 как в m = 1..M."""
    if not 1 <= i < j <= n:
        raise InvalidArgumentError(f"pair ({i}, {j}) invalid for N={n}")
    return (i - 1) * (2 * n - i) // 2 + (j - i)


def pair_list(n: int) -> List[Tuple[int, int]]:
    """Пары (i, j), i < j, в порядке возрастания m (индексы с 0)."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True, eq=False)
class ReceiverSet:
    positions: np.ndarray

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ValidationError("receivers", f"expected N×2 positions, got shape {positions.shape}")
        if len(positions) < 3:
            raise ValidationError("receivers", "at least three receivers are required")
        for i, j in pair_list(len(positions)):
            if np.array_equal(positions[i], positions[j]):
                raise ValidationError("receivers", f"receivers {i} and {j} coincide")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def pair_count(self) -> int:
        return pair_count(self.count)

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)


def factorize_covariance(covariance: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Проверка C и возврат (нижний множитель Холецкого, C⁻¹)."""
    covariance = np.asarray(covariance, dtype=float)
    if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
        raise CovarianceError(f"covariance must be square, got shape {covariance.shape}")
    if not np.all(np.isfinite(covariance)):
        raise CovarianceError("covariance has non-finite entries")
    if np.max(np.abs(covariance - covariance.T)) > SYMMETRY_TOLERANCE:
        raise CovarianceError("covariance is not symmetric")
    try:
        cholesky = linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError as exc:
        raise CovarianceError("covariance is not positive definite") from exc

    identity = np.eye(len(covariance))
    inverse = linalg.cho_solve((cholesky, True), identity)
    inverse = 0.5 * (inverse + inverse.T)
    if np.max(np.abs(inverse @ covariance - identity)) > INVERSE_TOLERANCE:
        raise CovarianceError("covariance is too ill-conditioned to invert")
    logger.debug(f"[MEAS] covariance cond={np.linalg.cond(covariance):.3g}")
    return cholesky, inverse


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    values: np.ndarray
    covariance: np.ndarray
    covariance_inverse: np.ndarray
    cholesky_factor: np.ndarray

    @classmethod
    def from_covariance(cls, values: Sequence[float], covariance: np.ndarray) -> "MeasurementSet":
        values = np.asarray(values, dtype=float)
        covariance = np.asarray(covariance, dtype=float)
        if covariance.shape != (len(values), len(values)):
            raise CovarianceError(
                f"covariance shape {covariance.shape} does not match {len(values)} measurements"
            )
        cholesky, inverse = factorize_covariance(covariance)
        return cls(values=values, covariance=covariance, covariance_inverse=inverse, cholesky_factor=cholesky)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class CostModel:
    receivers: ReceiverSet
    measurements: MeasurementSet

    def __post_init__(self) -> None:
        if len(self.measurements) != self.receivers.pair_count:
            raise InvalidArgumentError(
                f"{len(self.measurements)} measurements for {self.receivers.count} receivers, "
                f"expected {self.receivers.pair_count}"
            )


def _pair_arrays(n: int) -> Tuple[np.ndarray, np.ndarray]:
    first, second = np.triu_indices(n, k=1)
    return first, second


def range_difference(p: Sequence[float], p_i: Sequence[float], p_j: Sequence[float]) -> float:
    """g(p, p̃_i, p̃_j) = ‖p − p̃_i‖ − ‖p − p̃_j‖."""
    p = np.asarray(p, dtype=float)
    return float(np.linalg.norm(p - np.asarray(p_i, dtype=float)) - np.linalg.norm(p - np.asarray(p_j, dtype=float)))


def predict(p: Sequence[float], receivers: ReceiverSet) -> np.ndarray:
    """Вектор g(p) длины M в порядке пар."""
    distances = np.linalg.norm(receivers.positions - np.asarray(p, dtype=float), axis=1)
    first, second = _pair_arrays(receivers.count)
    return distances[first] - distances[second]


def residual(p: Sequence[float], model: CostModel) -> np.ndarray:
    return model.measurements.values - predict(p, model.receivers)


def cost(p: Sequence[float], model: CostModel) -> float:
    """J = εᵀ C⁻¹ ε, считается через множитель Холецкого (J ≥ 0)."""
    whitened = linalg.solve_triangular(model.measurements.cholesky_factor, residual(p, model), lower=True)
    return float(whitened @ whitened)


def log_likelihood(p: Sequence[float], model: CostModel) -> float:
    """ln p(Δd̂ | p) гауссовой модели: −½J − ½ln det(2πC)."""
    cholesky = model.measurements.cholesky_factor
    log_det = len(cholesky) * np.log(2.0 * np.pi) + 2.0 * np.sum(np.log(np.diag(cholesky)))
    return -0.5 * cost(p, model) - 0.5 * float(log_det)


def jacobian(p: Sequence[float], receivers: ReceiverSet) -> np.ndarray:
    """Матрица M×2: строка m = (p−p̃_i)/‖p−p̃_i‖ − (p−p̃_j)/‖p−p̃_j‖."""
    offsets = np.asarray(p, dtype=float) - receivers.positions
    distances = np.linalg.norm(offsets, axis=1)
    close = np.flatnonzero(distances < GUARD_RADIUS)
    if close.size:
        receiver_id = int(close[0])
        raise SingularityError(f"position coincides with receiver {receiver_id}", receiver_id)
    units = offsets / distances[:, None]
    first, second = _pair_arrays(receivers.count)
    return units[first] - units[second]


def gradient(p: Sequence[float], model: CostModel) -> np.ndarray:
    """∇J = −2·Gᵀ C⁻¹ ε."""
    g = jacobian(p, model.receivers)
    return -2.0 * g.T @ (model.measurements.covariance_inverse @ residual(p, model))


def draw_values(truth: np.ndarray, cholesky: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return truth + cholesky @ rng.standard_normal(len(truth))


def generate_measurements(scenario: "Scenario", rng: np.random.Generator) -> MeasurementSet:
    """Δd̂ = g(p_true) + L·u, u ~ N(0, I)."""
    truth = predict(scenario.true_position, scenario.receivers)
    covariance = scenario.covariance_matrix()
    if covariance.shape != (len(truth), len(truth)):
        raise CovarianceError(f"covariance shape {covariance.shape} does not match M={len(truth)}")
    cholesky, inverse = factorize_covariance(covariance)
    values = truth.copy() if scenario.noise_free else draw_values(truth, cholesky, rng)
    return MeasurementSet(values=values, covariance=covariance, covariance_inverse=inverse, cholesky_factor=cholesky)


def hyperbola_points(
    p_i: Sequence[float],
    p_j: Sequence[float],
    delta_d: float,
    half_span: float = 3.0,
    count: int = 121,
) -> np.ndarray:
    """Точки ветви {p : ‖p−p̃_i‖ − ‖p−p̃_j‖ = Δd}, параметр t ∈ [−half_span, half_span]."""
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    baseline = np.linalg.norm(p_j - p_i)
    if abs(delta_d) >= baseline:
        raise InvalidArgumentError(f"|Δd|={abs(delta_d):.3f} m has no locus for baseline {baseline:.3f} m")

    focal = baseline / 2.0
    semi_major = delta_d / 2.0
    semi_minor = np.sqrt(focal ** 2 - semi_major ** 2)
    axis = (p_j - p_i) / baseline
    normal = np.array([-axis[1], axis[0]])
    t = np.linspace(-half_span, half_span, count)
    along = semi_major * np.cosh(t)
    across = semi_minor * np.sinh(t)
    center = (p_i + p_j) / 2.0
    return center + along[:, None] * axis + across[:, None] * normal
