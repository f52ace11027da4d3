import asyncio
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.tdoa.config import get_config
from src.tdoa.errors import InvalidArgumentError, NumericError, SingularityError, TdoaError
from src.tdoa.services.measurement_model import (
    CostModel,
    MeasurementSet,
    cost,
    draw_values,
    generate_measurements,
    gradient,
    predict,
)
from src.tdoa.services.optimizers import ALL_ALGORITHMS, Algorithm, OptimizerConfig, init_state, step
from src.tdoa.services.scenarios import MeasurementSource, Scenario
from src.tdoa.services.signal_frontend import estimate_range_differences, synthesize_array

logger = logging.getLogger(__name__)

# Прогон считается расходящимся, если J превышает этот порог
DIVERGENCE_COST = 1e12
# Запас устойчивости после пересечения порога ошибки
STABILITY_FACTOR = 1.5


class TraceRecord(NamedTuple):
    iteration: int
    x: float
    y: float
    cost: float
    position_error: float


@dataclass(eq=False)
class ConvergenceTrace:
    positions: np.ndarray
    costs: np.ndarray
    errors: np.ndarray
    algorithm: Algorithm
    seed: int
    scenario: str
    config: Dict[str, object] = field(default_factory=dict)
    measurements: Optional[np.ndarray] = None
    failure: Optional[str] = None

    def __len__(self) -> int:
        return len(self.costs)

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def final_error(self) -> float:
        return float(self.errors[-1]) if len(self) else float("nan")

    def records(self) -> Iterator[TraceRecord]:
        for k in range(len(self)):
            x, y = self.positions[k]
            yield TraceRecord(k, float(x), float(y), float(self.costs[k]), float(self.errors[k]))


def _draw_measurements(scenario: Scenario, rng: np.random.Generator) -> MeasurementSet:
    if scenario.measurement_source is MeasurementSource.DIRECT:
        return generate_measurements(scenario, rng)

    params = scenario.signal_params
    signals = synthesize_array(scenario.receivers.positions, scenario.true_position, params, rng)
    estimates = estimate_range_differences(signals, params)
    values = np.array([range_difference for _, range_difference in estimates])
    return MeasurementSet.from_covariance(values, scenario.covariance_matrix())


def run(scenario: Scenario, config: OptimizerConfig, seed: int) -> ConvergenceTrace:
    """
    Один прогон: измерения генерируются один раз (если не включена перегенерация),
    затем K шагов оптимизатора из начальной точки. Трасса содержит K+1 записей.
    """
    rng = np.random.default_rng(seed)
    measurements = _draw_measurements(scenario, rng)
    model = CostModel(scenario.receivers, measurements)
    truth = predict(scenario.true_position, scenario.receivers)

    state = init_state(scenario.start_position, config)
    positions = [state.position]
    costs = [cost(state.position, model)]
    failure = None
    if not np.isfinite(costs[0]) or costs[0] > DIVERGENCE_COST:
        failure = f"initial cost {costs[0]:.3g} is not usable"
        positions, costs = [], []

    for _ in range(scenario.iterations if failure is None else 0):
        if scenario.resample_each_iteration:
            values = draw_values(truth, measurements.cholesky_factor, rng)
            model = CostModel(scenario.receivers, replace(measurements, values=values))
        try:
            state = step(state, gradient(state.position, model), config)
        except (SingularityError, NumericError) as exc:
            failure = f"iteration {state.iteration + 1}: {exc}"
            break
        if not np.all(np.isfinite(state.position)):
            failure = f"iteration {state.iteration}: non-finite position"
            break
        value = cost(state.position, model)
        if not np.isfinite(value) or value > DIVERGENCE_COST:
            failure = f"iteration {state.iteration}: diverged (J={value:.3g})"
            break
        positions.append(state.position)
        costs.append(value)

    positions_array = np.array(positions, dtype=float).reshape(-1, 2)
    errors = np.linalg.norm(positions_array - scenario.true_position, axis=1)
    trace = ConvergenceTrace(
        positions=positions_array,
        costs=np.array(costs, dtype=float),
        errors=errors,
        algorithm=config.algorithm,
        seed=seed,
        scenario=scenario.name,
        config=config.as_dict(),
        measurements=measurements.values,
        failure=failure,
    )
    if failure:
        logger.warning(f"[RUN] {scenario.name} {config.algorithm.value} seed={seed} failed: {failure}")
    else:
        logger.debug(
            f"[RUN] {scenario.name} {config.algorithm.value} seed={seed}: "
            f"final error {trace.final_error:.3f} m after {scenario.iterations} iterations"
        )
    return trace


def _failed_trace(scenario: Scenario, config: OptimizerConfig, seed: int, reason: str) -> ConvergenceTrace:
    return ConvergenceTrace(
        positions=np.zeros((0, 2)),
        costs=np.zeros(0),
        errors=np.zeros(0),
        algorithm=config.algorithm,
        seed=seed,
        scenario=scenario.name,
        config=config.as_dict(),
        failure=reason,
    )


def iterations_to_threshold(trace: ConvergenceTrace, error_threshold: float) -> Optional[int]:
    """
    Первая итерация k с ошибкой ≤ порога, после которой ошибка больше не превышает
    1.5×порог. None, если такой итерации нет.
    """
    if not error_threshold > 0:
        raise InvalidArgumentError(f"error_threshold must be > 0, got {error_threshold}")
    errors = np.asarray(trace.errors)
    if errors.size == 0:
        return None
    stable = errors <= STABILITY_FACTOR * error_threshold
    stays_stable = np.logical_and.accumulate(stable[::-1])[::-1]
    candidates = np.flatnonzero((errors <= error_threshold) & stays_stable)
    return int(candidates[0]) if candidates.size else None


@dataclass(frozen=True)
class CheckpointStats:
    checkpoint: int
    runs: int
    median: Optional[float]
    q1: Optional[float]
    q3: Optional[float]

    @property
    def iqr(self) -> Optional[float]:
        if self.q1 is None or self.q3 is None:
            return None
        return self.q3 - self.q1


@dataclass(frozen=True)
class ThresholdStats:
    threshold: float
    runs: int
    reached: int
    # None: медиана не достигнута (больше половины прогонов не пересекли порог)
    median: Optional[float]


@dataclass(frozen=True)
class CellSummary:
    scenario: str
    algorithm: Algorithm
    runs: int
    failures: Tuple[Tuple[int, str], ...]
    checkpoints: Tuple[CheckpointStats, ...]
    threshold: ThresholdStats

    def at(self, checkpoint: int) -> Optional[CheckpointStats]:
        for stats in self.checkpoints:
            if stats.checkpoint == checkpoint:
                return stats
        return None


@dataclass(frozen=True)
class SuiteSummary:
    seeds: Tuple[int, ...]
    cells: Tuple[CellSummary, ...]
    traces: Dict[Tuple[str, Algorithm, int], ConvergenceTrace] = field(
        default_factory=dict, compare=False, repr=False
    )

    def cell(self, scenario: str, algorithm: Algorithm) -> Optional[CellSummary]:
        for cell in self.cells:
            if cell.scenario == scenario and cell.algorithm is algorithm:
                return cell
        return None

    @property
    def failed_runs(self) -> int:
        return sum(len(cell.failures) for cell in self.cells)


def _checkpoint_stats(traces: Sequence[ConvergenceTrace], checkpoint: int) -> CheckpointStats:
    errors = np.array([trace.errors[checkpoint] for trace in traces if len(trace) > checkpoint])
    if errors.size == 0:
        return CheckpointStats(checkpoint, 0, None, None, None)
    q1, median, q3 = np.percentile(errors, [25, 50, 75])
    return CheckpointStats(checkpoint, int(errors.size), float(median), float(q1), float(q3))


def _threshold_stats(traces: Sequence[ConvergenceTrace], threshold: float) -> ThresholdStats:
    crossings = [iterations_to_threshold(trace, threshold) for trace in traces]
    reached = [k for k in crossings if k is not None]
    if not crossings:
        return ThresholdStats(threshold, 0, 0, None)
    values = np.array([np.inf if k is None else float(k) for k in crossings])
    median = float(np.median(values))
    return ThresholdStats(threshold, len(crossings), len(reached), median if np.isfinite(median) else None)


def summarize(
    traces: Sequence[ConvergenceTrace],
    scenario: str,
    algorithm: Algorithm,
    checkpoints: Sequence[int],
    error_threshold: float,
) -> CellSummary:
    ordered = sorted(traces, key=lambda trace: trace.seed)
    successful = [trace for trace in ordered if trace.ok]
    failures = tuple((trace.seed, trace.failure or "") for trace in ordered if not trace.ok)
    return CellSummary(
        scenario=scenario,
        algorithm=algorithm,
        runs=len(ordered),
        failures=failures,
        checkpoints=tuple(_checkpoint_stats(successful, k) for k in sorted(set(checkpoints))),
        threshold=_threshold_stats(successful, error_threshold),
    )


async def run_suite(
    scenarios: Sequence[Scenario],
    configs: Sequence[OptimizerConfig],
    seeds: Sequence[int],
    checkpoints: Optional[Sequence[int]] = None,
    error_threshold: Optional[float] = None,
    workers: Optional[int] = None,
    keep_traces: bool = False,
) -> SuiteSummary:
    """Все тройки (сценарий, оптимизатор, seed); сбой отдельного прогона не прерывает набор."""
    if not scenarios or not configs or not seeds:
        raise InvalidArgumentError("suite needs at least one scenario, config and seed")
    names = [scenario.name for scenario in scenarios]
    algorithms = [config.algorithm for config in configs]
    if len(set(names)) != len(names):
        raise InvalidArgumentError(f"duplicate scenario names: {names}")
    if len(set(algorithms)) != len(algorithms):
        raise InvalidArgumentError(f"duplicate algorithms: {[a.value for a in algorithms]}")
    seed_list = [int(seed) for seed in seeds]
    if len(set(seed_list)) != len(seed_list):
        raise InvalidArgumentError(f"duplicate seeds: {seed_list}")

    app_config = get_config()
    checkpoints = list(checkpoints) if checkpoints is not None else app_config.checkpoints
    error_threshold = error_threshold if error_threshold is not None else app_config.error_threshold
    semaphore = asyncio.Semaphore(workers or app_config.workers)

    async def _one(scenario: Scenario, config: OptimizerConfig, seed: int) -> ConvergenceTrace:
        async with semaphore:
            try:
                return await asyncio.to_thread(run, scenario, config, seed)
            except TdoaError as exc:
                logger.warning(f"[SUITE] {scenario.name} {config.algorithm.value} seed={seed}: {exc}")
                return _failed_trace(scenario, config, seed, str(exc))

    ordered_seeds = sorted(seed_list)
    logger.info(
        f"[SUITE] {len(scenarios)} scenario(s) × {len(configs)} algorithm(s) × {len(ordered_seeds)} seed(s)"
    )
    jobs = [(scenario, config, seed) for scenario in scenarios for config in configs for seed in ordered_seeds]
    traces = await asyncio.gather(*(_one(*job) for job in jobs))

    by_cell: Dict[Tuple[str, Algorithm], List[ConvergenceTrace]] = {}
    for trace in traces:
        by_cell.setdefault((trace.scenario, trace.algorithm), []).append(trace)

    cells = []
    for scenario in scenarios:
        for config in configs:
            cell = summarize(
                by_cell.get((scenario.name, config.algorithm), []),
                scenario.name,
                config.algorithm,
                checkpoints,
                error_threshold,
            )
            logger.info(
                f"[SUITE] {scenario.name} {config.algorithm.value}: {cell.runs} runs, "
                f"{len(cell.failures)} failed"
            )
            cells.append(cell)

    kept = {(t.scenario, t.algorithm, t.seed): t for t in traces} if keep_traces else {}
    return SuiteSummary(seeds=tuple(ordered_seeds), cells=tuple(cells), traces=kept)


class Claim(NamedTuple):
    name: str
    passed: bool
    detail: str


def _median_at(summary: SuiteSummary, scenario: str, algorithm: Algorithm, k: int) -> Optional[float]:
    cell = summary.cell(scenario, algorithm)
    stats = cell.at(k) if cell else None
    return stats.median if stats else None


def _crossing(summary: SuiteSummary, scenario: str, algorithm: Algorithm) -> float:
    cell = summary.cell(scenario, algorithm)
    if cell is None or cell.threshold.median is None:
        return float("inf")
    return cell.threshold.median


def evaluate_claims(summary: SuiteSummary) -> List[Claim]:
    """Проверка утверждений о сходимости по медианам набора; только для имеющихся ячеек."""
    claims: List[Claim] = []
    af, rms, sgdm, sgd, adam = (
        Algorithm.RMSPROP_AF,
        Algorithm.RMSPROP,
        Algorithm.SGD_MOMENTUM,
        Algorithm.SGD,
        Algorithm.ADAM,
    )

    error_50 = _median_at(summary, "scenario1", af, 50)
    if error_50 is not None:
        claims.append(
            Claim("scenario1-error-at-50", 1.0 <= error_50 <= 5.0, f"RMSProp+AF median error {error_50:.3f} m")
        )

    if all(summary.cell("scenario1", a) for a in (af, rms, sgdm, sgd, adam)):
        k = {a: _crossing(summary, "scenario1", a) for a in (af, rms, sgdm, sgd, adam)}
        passed = k[af] < k[sgdm] < k[rms] and k[sgd] > k[rms] and k[adam] > k[rms]
        detail = ", ".join(f"{a.value}={k[a]:g}" for a in (af, sgdm, rms, sgd, adam))
        claims.append(Claim("scenario1-ordering", passed, f"median iterations to threshold: {detail}"))

    af_300 = _median_at(summary, "scenario2", af, 300)
    rms_300 = _median_at(summary, "scenario2", rms, 300)
    if af_300 is not None and rms_300 is not None:
        passed = 3.0 <= af_300 <= 9.0 and 6.0 <= rms_300 <= 12.0 and af_300 < rms_300
        claims.append(
            Claim("scenario2-error-floors", passed, f"RMSProp+AF {af_300:.3f} m, RMSProp {rms_300:.3f} m")
        )

    for algorithm in ALL_ALGORITHMS:
        first = _median_at(summary, "scenario1", algorithm, 300)
        second = _median_at(summary, "scenario2", algorithm, 300)
        if first is not None and second is not None:
            claims.append(
                Claim(
                    f"scenario-difficulty-{algorithm.slug}",
                    second > first,
                    f"{algorithm.value}: scenario2 {second:.3f} m vs scenario1 {first:.3f} m",
                )
            )
    return claims

