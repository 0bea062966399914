import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melbind.audio import AudioClip, mix_with_snr
from melbind.audio.mixing import snr_gain
from melbind.errors import DegenerateInputError, DomainError

SR = 16000


def tone(freq, rms, n=SR):
    t = np.arange(n) / SR
    return AudioClip(rms * np.sqrt(2) * np.sin(2 * np.pi * freq * t), SR)


def measured_snr_db(mix: AudioClip, noise_component: AudioClip) -> float:
    signal = mix.samples - noise_component.samples
    return 10.0 * np.log10(np.mean(signal**2) / np.mean(noise_component.samples**2))


def test_gain_of_equal_rms_at_20db_is_one_tenth():
    signal = tone(440, 0.1)
    noise = tone(1333, 0.1)
    assert snr_gain(signal, noise, 20.0) == pytest.approx(0.1, abs=1e-12)


def test_gain_at_0db_is_one():
    signal = tone(440, 0.1)
    noise = tone(1333, 0.1)
    assert snr_gain(signal, noise, 0.0) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    snr_db=st.floats(min_value=-10, max_value=40),
)
def test_measured_snr_matches_target(seed, snr_db):
    rng = np.random.default_rng(seed)
    signal = AudioClip(0.2 * rng.standard_normal(SR), SR)
    noise = AudioClip(0.2 * rng.standard_normal(SR), SR)
    mix, scaled_noise = mix_with_snr(signal, noise, snr_db, return_noise=True)
    assert measured_snr_db(mix, scaled_noise) == pytest.approx(snr_db, abs=0.05)


def test_peak_normalization_preserves_snr():
    rng = np.random.default_rng(5)
    signal = AudioClip(np.clip(0.95 * rng.standard_normal(SR), -1, 1), SR)
    noise = AudioClip(np.clip(0.95 * rng.standard_normal(SR), -1, 1), SR)
    mix, scaled_noise = mix_with_snr(signal, noise, 0.0, return_noise=True)
    assert mix.peak() <= 1.0 + 1e-12
    assert measured_snr_db(mix, scaled_noise) == pytest.approx(0.0, abs=0.05)


def test_noise_shorter_than_signal_is_looped():
    signal = AudioClip(0.1 * np.ones(SR), SR)
    noise = AudioClip(0.1 * np.sin(2 * np.pi * 440 * np.arange(SR // 4) / SR), SR)
    mix, scaled = mix_with_snr(signal, noise, 20.0, return_noise=True)
    assert len(mix) == SR
    assert len(scaled) == SR


def test_zero_power_noise_rejected():
    signal = tone(440, 0.1)
    with pytest.raises(DegenerateInputError):
        mix_with_snr(signal, AudioClip(np.zeros(SR), SR), 20.0)


def test_sample_rate_mismatch_rejected():
    signal = tone(440, 0.1)
    noise = AudioClip(0.1 * np.ones(8000), 8000)
    with pytest.raises(DomainError):
        mix_with_snr(signal, noise, 20.0)
