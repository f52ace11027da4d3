import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal as sps

from src.tdoa.errors import (
    DegenerateChannelError,
    DegenerateSignalError,
    InvalidArgumentError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Фильтр для псевдослучайной формы сигнала: полоса до половины Найквиста
_FIR_TAPS = 31
_FIR_CUTOFF = 0.5


class WaveformKind(str, Enum):
    IMPULSE = "impulse"
    PSEUDO_RANDOM = "pseudo_random"


@dataclass(frozen=True)
class SignalParams:
    sample_rate: float = 1.5e9
    num_samples: int = 2048
    noise_stddev: float = 0.01
    propagation_speed: float = 3.0e8
    waveform_kind: WaveformKind = WaveformKind.PSEUDO_RANDOM
    burst_samples: int = 1024
    max_lag: Optional[int] = None
    subsample: bool = False

    def __post_init__(self) -> None:
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate", "must be > 0")
        if self.num_samples <= 0:
            raise ValidationError("num_samples", "must be > 0")
        if not self.noise_stddev >= 0:
            raise ValidationError("noise_stddev", "must be >= 0")
        if not self.propagation_speed > 0:
            raise ValidationError("propagation_speed", "must be > 0")
        if not 0 < self.burst_samples <= self.num_samples:
            raise ValidationError("burst_samples", "must be in 1..num_samples")
        if self.max_lag is not None and not 0 < self.max_lag < self.num_samples:
            raise ValidationError("max_lag", "must be in 1..num_samples-1")
        # Строки из конфигурации приводим к перечислению
        object.__setattr__(self, "waveform_kind", WaveformKind(self.waveform_kind))

    @property
    def effective_max_lag(self) -> int:
        if self.max_lag is not None:
            return self.max_lag
        return max(1, self.num_samples // 2 - 1)

    @property
    def meters_per_sample(self) -> float:
        return self.propagation_speed / self.sample_rate


@dataclass(frozen=True)
class ReceivedSignal:
    samples: np.ndarray
    receiver_id: int
    gain: complex
    # Только для тестовых оракулов
    true_delay_samples: int


def make_waveform(params: SignalParams, rng: np.random.Generator) -> np.ndarray:
    """Передаваемый сигнал s(t): импульс или полосовой псевдослучайный пакет с единичным RMS."""
    waveform = np.zeros(params.num_samples)
    if params.waveform_kind is WaveformKind.IMPULSE:
        waveform[0] = 1.0
        return waveform

    burst = rng.standard_normal(params.burst_samples)
    taps = sps.firwin(_FIR_TAPS, _FIR_CUTOFF)
    filtered = sps.lfilter(taps, 1.0, burst)
    rms = np.sqrt(np.mean(filtered ** 2))
    waveform[: params.burst_samples] = filtered / rms
    return waveform


def synthesize_received(
    waveform: Sequence[float],
    delay_samples: int,
    gain: complex,
    noise_stddev: float,
    rng: np.random.Generator,
    receiver_id: int = 0,
) -> ReceivedSignal:
    """z_i = h_i·s(t−τ_i) + η_i: сдвиг с дополнением нулями, без циклического переноса."""
    waveform = np.asarray(waveform)
    n = len(waveform)
    if not 0 <= delay_samples < n:
        raise InvalidArgumentError(f"delay {delay_samples} out of range 0..{n - 1}")
    if noise_stddev < 0:
        raise InvalidArgumentError(f"noise_stddev must be >= 0, got {noise_stddev}")

    shifted = np.zeros(n, dtype=complex)
    shifted[delay_samples:] = waveform[: n - delay_samples]
    samples = complex(gain) * shifted
    if noise_stddev > 0:
        samples = samples + noise_stddev * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    return ReceivedSignal(
        samples=samples,
        receiver_id=receiver_id,
        gain=complex(gain),
        true_delay_samples=int(delay_samples),
    )


def equalize(z: ReceivedSignal) -> np.ndarray:
    """z̄_i = (h_i*/|h_i|²)·z_i."""
    gain = complex(z.gain)
    power = abs(gain) ** 2
    if power == 0:
        raise DegenerateChannelError(f"receiver {z.receiver_id}: zero channel gain")
    return (gain.conjugate() / power) * np.asarray(z.samples)


def ncc_peak(
    a: Sequence[complex],
    b: Sequence[complex],
    max_lag: int,
    subsample: bool = False,
) -> Tuple[Union[int, float], float]:
    """
    Пик нормированной взаимной корреляции в окне [−max_lag, +max_lag].

    Положительный лаг означает, что a опережает b (b(u + lag) ≈ a(u)).
    Возвращает (lag, coefficient). Без subsample лаг целый (int, в отсчётах); с subsample
    это вещественное число: вершина параболы через три точки вокруг пика.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    if len(b) != n:
        raise InvalidArgumentError(f"length mismatch: {n} vs {len(b)}")
    if not 0 < max_lag < n:
        raise InvalidArgumentError(f"max_lag must be in 1..{n - 1}, got {max_lag}")

    energy_a = np.sqrt(np.sum(np.abs(a) ** 2))
    energy_b = np.sqrt(np.sum(np.abs(b) ** 2))
    if energy_a == 0 or energy_b == 0:
        raise DegenerateSignalError("zero-energy input to NCC")

    cc = sps.correlate(b, a, mode="full")
    lags = sps.correlation_lags(n, n, mode="full")
    window = np.abs(lags) <= max_lag
    values = np.real(cc[window]) / (energy_a * energy_b)
    window_lags = lags[window]

    idx = int(np.argmax(values))
    lag = int(window_lags[idx])
    coefficient = float(values[idx])

    if subsample and 0 < idx < len(values) - 1:
        y0, y1, y2 = values[idx - 1], values[idx], values[idx + 1]
        curvature = y0 - 2.0 * y1 + y2
        if curvature < 0:
            delta = 0.5 * (y0 - y2) / curvature
            return lag + float(delta), float(y1 - 0.25 * (y0 - y2) * delta)
    return lag, coefficient


def estimate_range_differences(
    signals: Sequence[ReceivedSignal],
    params: SignalParams,
) -> List[Tuple[Tuple[int, int], float]]:
    """
    Разности расстояний Δd̂_ij = c·Δτ̂_ij для всех пар i < j (индексы в списке signals).

    Δτ̂_ij оценивается как лаг NCC пары (z̄_j, z̄_i), т.е. τ_i − τ_j.
    Без subsample Δd̂ кратна шагу c/fs; с subsample лаг дробный и квантования нет.
    """
    if len(signals) < 2:
        raise InvalidArgumentError("need at least 2 signals")
    lengths = {len(z.samples) for z in signals}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"signals differ in length: {sorted(lengths)}")
    n = lengths.pop()

    equalized = []
    for z in signals:
        eq = equalize(z)
        if not np.any(eq):
            raise DegenerateSignalError(f"receiver {z.receiver_id}: zero-energy signal", z.receiver_id)
        equalized.append(eq)

    max_lag = min(params.effective_max_lag, n - 1)
    results = []
    for i in range(len(signals)):
        for j in range(i + 1, len(signals)):
            lag, coefficient = ncc_peak(equalized[j], equalized[i], max_lag, params.subsample)
            range_difference = params.propagation_speed * lag / params.sample_rate
            logger.debug(f"[NCC] pair ({i},{j}) lag={lag} coef={coefficient:.4f} Δd={range_difference:.3f}")
            results.append(((i, j), range_difference))
    return results


def synthesize_array(
    receivers: np.ndarray,
    source: Sequence[float],
    params: SignalParams,
    rng: np.random.Generator,
) -> List[ReceivedSignal]:
    """Принятые сигналы всех приёмников для источника в точке source (задержки квантуются до отсчёта)."""
    receivers = np.asarray(receivers, dtype=float)
    source = np.asarray(source, dtype=float)
    waveform = make_waveform(params, rng)

    distances = np.linalg.norm(receivers - source, axis=1)
    delays = np.rint(distances / params.meters_per_sample).astype(int)
    if np.any(delays >= params.num_samples):
        raise InvalidArgumentError(
            f"propagation delay {int(delays.max())} exceeds num_samples={params.num_samples}"
        )

    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(receivers))
    signals = []
    for receiver_id, (delay, phase) in enumerate(zip(delays, phases)):
        signals.append(
            synthesize_received(
                waveform,
                int(delay),
                np.exp(1j * phase),
                params.noise_stddev,
                rng,
                receiver_id=receiver_id,
            )
        )
    return signals
