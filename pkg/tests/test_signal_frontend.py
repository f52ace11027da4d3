import numpy as np
import pytest

from src.tdoa.errors import DegenerateChannelError, DegenerateSignalError, InvalidArgumentError, ValidationError
from src.tdoa.services.measurement_model import pair_list
from src.tdoa.services.scenarios import PRESET_RECEIVERS
from src.tdoa.services.signal_frontend import (
    ReceivedSignal,
    SignalParams,
    WaveformKind,
    equalize,
    estimate_range_differences,
    make_waveform,
    ncc_peak,
    synthesize_array,
    synthesize_received,
)


@pytest.fixture
def short_params():
    return SignalParams(num_samples=64, burst_samples=16, noise_stddev=0.0)


@pytest.fixture
def waveform(short_params, rng):
    return make_waveform(short_params, rng)


def _shifted(waveform, delay):
    out = np.zeros(len(waveform))
    out[delay:] = waveform[: len(waveform) - delay]
    return out


# --- synthesize_received -----------------------------------------------------

def test_impulse_is_shifted_by_delay(rng):
    params = SignalParams(num_samples=32, burst_samples=1, waveform_kind="impulse")
    impulse = make_waveform(params, rng)
    z = synthesize_received(impulse, 5, 1.0, 0.0, rng)
    expected = np.zeros(32)
    expected[5] = 1.0
    np.testing.assert_array_equal(z.samples, expected)
    assert z.true_delay_samples == 5


def test_zero_delay_unit_gain_is_identity(waveform, rng):
    z = synthesize_received(waveform, 0, 1.0, 0.0, rng)
    np.testing.assert_array_equal(z.samples, waveform)


def test_scaled_shift_matches_direct_copy(waveform, rng):
    z = synthesize_received(waveform, 7, 2 + 0j, 0.0, rng)
    expected = 2.0 * _shifted(waveform, 7)
    for sample, reference in zip(z.samples, expected):
        assert sample == reference


def test_shift_is_zero_padded(waveform, rng):
    z = synthesize_received(waveform, 10, 1.0, 0.0, rng)
    np.testing.assert_array_equal(z.samples[:10], np.zeros(10))
    assert len(z.samples) == len(waveform)


@pytest.mark.parametrize("delay", [-1, 64, 100])
def test_delay_out_of_range(waveform, rng, delay):
    with pytest.raises(InvalidArgumentError):
        synthesize_received(waveform, delay, 1.0, 0.0, rng)


def test_negative_noise_rejected(waveform, rng):
    with pytest.raises(InvalidArgumentError):
        synthesize_received(waveform, 0, 1.0, -0.1, rng)


def test_noise_has_requested_stddev(rng):
    silent = np.zeros(200_000)
    z = synthesize_received(silent, 0, 1.0, 0.3, rng)
    assert np.std(z.samples.real) == pytest.approx(0.3, rel=0.01)
    assert np.std(z.samples.imag) == pytest.approx(0.3, rel=0.01)


# --- equalize ------------------------------------------------------------------

@pytest.mark.parametrize("gain", [1.0, 2.0, 1j, np.exp(0.7j)])
def test_equalize_recovers_delayed_waveform(waveform, rng, gain):
    z = synthesize_received(waveform, 3, gain, 0.0, rng)
    np.testing.assert_allclose(equalize(z), _shifted(waveform, 3), atol=1e-12)


def test_equalize_zero_gain(waveform):
    z = ReceivedSignal(samples=np.zeros(len(waveform), dtype=complex), receiver_id=2, gain=0j, true_delay_samples=0)
    with pytest.raises(DegenerateChannelError):
        equalize(z)


# --- ncc_peak ------------------------------------------------------------------

def test_self_correlation(waveform):
    lag, coefficient = ncc_peak(waveform, waveform, 10)
    assert lag == 0
    assert coefficient == pytest.approx(1.0, abs=1e-12)


def test_positive_lag_means_first_signal_leads():
    a = np.zeros(32)
    b = np.zeros(32)
    a[0] = 1.0
    b[5] = 1.0
    lag, coefficient = ncc_peak(a, b, 10)
    assert lag == 5
    assert coefficient == pytest.approx(1.0)


def test_gain_invariance_of_peak(waveform):
    lag, coefficient = ncc_peak(waveform, 3.0 * _shifted(waveform, 2), 10)
    assert lag == 2
    assert coefficient == pytest.approx(1.0, abs=1e-12)


def test_antisymmetry(waveform):
    shifted = _shifted(waveform, 4)
    forward, _ = ncc_peak(waveform, shifted, 10)
    backward, _ = ncc_peak(shifted, waveform, 10)
    assert forward == -backward == 4


def test_scaling_either_input_keeps_lag_and_coefficient(waveform, rng):
    noisy = _shifted(waveform, 3) + 0.05 * rng.standard_normal(len(waveform))
    reference_lag, reference_coefficient = ncc_peak(waveform, noisy, 10)
    for k in rng.uniform(0.01, 100.0, size=20):
        lag, coefficient = ncc_peak(waveform, k * noisy, 10)
        assert lag == reference_lag
        assert coefficient == pytest.approx(reference_coefficient, rel=1e-12)
        lag, coefficient = ncc_peak(k * waveform, noisy, 10)
        assert lag == reference_lag
        assert coefficient == pytest.approx(reference_coefficient, rel=1e-12)


def test_coefficient_is_bounded(rng):
    a = rng.standard_normal(128)
    b = rng.standard_normal(128)
    _, coefficient = ncc_peak(a, b, 60)
    assert -1.0 - 1e-12 <= coefficient <= 1.0 + 1e-12


def test_subsample_refinement_stays_near_integer_peak(waveform):
    lag, _ = ncc_peak(waveform, _shifted(waveform, 2), 10, subsample=True)
    assert abs(lag - 2) < 0.5


def test_subsample_lag_is_fractional_between_samples(waveform):
    mixed = 0.7 * _shifted(waveform, 2) + 0.3 * _shifted(waveform, 3)
    integer_lag, _ = ncc_peak(waveform, mixed, 10)
    assert isinstance(integer_lag, int)
    assert integer_lag == 2

    lag, _ = ncc_peak(waveform, mixed, 10, subsample=True)
    assert isinstance(lag, float)
    assert 2.0 < lag < 2.5


def test_zero_energy_input(waveform):
    with pytest.raises(DegenerateSignalError):
        ncc_peak(np.zeros(len(waveform)), waveform, 10)


@pytest.mark.parametrize("max_lag", [0, 64])
def test_max_lag_range(waveform, max_lag):
    with pytest.raises(InvalidArgumentError):
        ncc_peak(waveform, waveform, max_lag)


def test_length_mismatch(waveform):
    with pytest.raises(InvalidArgumentError):
        ncc_peak(waveform, waveform[:-1], 10)


# --- estimate_range_differences ------------------------------------------------

def test_noise_free_recovery_is_exact(rng):
    params = SignalParams(noise_stddev=0.0)
    signals = synthesize_array(PRESET_RECEIVERS, (40.0, 80.0), params, rng)
    estimates = estimate_range_differences(signals, params)

    assert [pair for pair, _ in estimates] == pair_list(4)
    for (i, j), value in estimates:
        expected = params.meters_per_sample * (signals[i].true_delay_samples - signals[j].true_delay_samples)
        assert value == pytest.approx(expected, abs=1e-9)


def test_noise_free_impulses(rng):
    params = SignalParams(num_samples=1024, burst_samples=1, waveform_kind=WaveformKind.IMPULSE, noise_stddev=0.0)
    signals = synthesize_array(PRESET_RECEIVERS, (75.0, 65.0), params, rng)
    for (i, j), value in estimate_range_differences(signals, params):
        expected = params.meters_per_sample * (signals[i].true_delay_samples - signals[j].true_delay_samples)
        assert value == pytest.approx(expected, abs=1e-9)


def test_identical_signals_give_zero(waveform, rng, short_params):
    z = synthesize_received(waveform, 4, 1.0, 0.0, rng)
    assert estimate_range_differences([z, z], short_params) == [((0, 1), 0.0)]


def test_output_count(rng):
    params = SignalParams(num_samples=256, burst_samples=64, noise_stddev=0.01)
    receivers = [(0, 0), (5, 0), (0, 5), (5, 5), (2, 7)]
    signals = synthesize_array(receivers, (2.0, 2.0), params, rng)
    assert len(estimate_range_differences(signals, params)) == 10
    assert len(estimate_range_differences(signals[:4], params)) == 6


def test_zero_energy_receiver_is_identified(waveform, rng, short_params):
    good = synthesize_received(waveform, 0, 1.0, 0.0, rng, receiver_id=0)
    silent = ReceivedSignal(samples=np.zeros(64, dtype=complex), receiver_id=1, gain=1 + 0j, true_delay_samples=0)
    with pytest.raises(DegenerateSignalError) as excinfo:
        estimate_range_differences([good, silent], short_params)
    assert excinfo.value.receiver_id == 1


def test_single_signal_rejected(waveform, rng, short_params):
    z = synthesize_received(waveform, 0, 1.0, 0.0, rng)
    with pytest.raises(InvalidArgumentError):
        estimate_range_differences([z], short_params)


def test_source_out_of_sample_window(rng):
    params = SignalParams(num_samples=128, burst_samples=32)
    with pytest.raises(InvalidArgumentError):
        synthesize_array(PRESET_RECEIVERS, (400.0, 400.0), params, rng)


@pytest.mark.parametrize(
    "field, kwargs",
    [
        ("sample_rate", {"sample_rate": 0.0}),
        ("num_samples", {"num_samples": 0}),
        ("noise_stddev", {"noise_stddev": -1.0}),
        ("propagation_speed", {"propagation_speed": -3e8}),
        ("burst_samples", {"num_samples": 16, "burst_samples": 32}),
    ],
)
def test_signal_params_invariants(field, kwargs):
    with pytest.raises(ValidationError) as excinfo:
        SignalParams(**kwargs)
    assert excinfo.value.field == field


def test_pseudo_random_waveform_has_unit_rms_burst(rng):
    params = SignalParams(num_samples=256, burst_samples=128)
    waveform = make_waveform(params, rng)
    assert np.sqrt(np.mean(waveform[:128] ** 2)) == pytest.approx(1.0)
    np.testing.assert_array_equal(waveform[128:], np.zeros(128))


@pytest.mark.slow
def test_delay_estimates_at_20_db_snr():
    # Единичная мощность пакета, шум 2σ² = 0.005: SNR ≈ 23 дБ
    params = SignalParams(sample_rate=6e8, num_samples=1024, burst_samples=512, noise_stddev=0.05)
    rng = np.random.default_rng(99)
    hits = total = 0
    for _ in range(1000):
        source = rng.uniform(5.0, 65.0, size=2)
        signals = synthesize_array(PRESET_RECEIVERS, source, params, rng)
        for (i, j), value in estimate_range_differences(signals, params):
            truth = params.meters_per_sample * (signals[i].true_delay_samples - signals[j].true_delay_samples)
            total += 1
            hits += abs(value - truth) <= params.meters_per_sample + 1e-9
    assert hits / total >= 0.95
