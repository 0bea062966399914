import numpy as np
import pytest

from melbind.audio import click_track, noise_texture, synth_fixture, tonal
from melbind.audio.fixtures import FixtureSpec, beat_period_samples, pitch_class_index
from melbind.errors import DomainError

SR = 16000


def pitch_class_of(freq_hz: float) -> int:
    return int(round(12 * np.log2(freq_hz / 440.0) + 69)) % 12


def test_click_track_grid_is_exact():
    clip = click_track(120, 10.0, seed=1)
    period = beat_period_samples(120)
    assert period == 8000  # 0.5 s exactly on the sample grid
    onsets = list(range(0, len(clip), period))
    assert len(onsets) == 20
    burst = int(0.008 * SR)
    for onset in onsets:
        assert np.abs(clip.samples[onset : onset + burst]).max() > 0
        gap = clip.samples[onset + burst : onset + period]
        assert np.all(gap == 0.0)
    iois = np.diff(onsets) / SR
    assert np.all(iois == 0.5)


def test_click_track_deterministic():
    a = click_track(90, 4.0, seed=7)
    b = click_track(90, 4.0, seed=7)
    assert np.array_equal(a.samples, b.samples)
    c = click_track(90, 4.0, seed=8)
    assert not np.array_equal(a.samples, c.samples)


def test_tonal_strongest_peaks_are_triad_pitch_classes():
    clip = tonal("C", "major", 100, 6.0, seed=2)
    spectrum = np.abs(np.fft.rfft(clip.samples))
    freqs = np.fft.rfftfreq(len(clip.samples), 1 / SR)
    in_range = (freqs >= 100) & (freqs <= 2000)
    local_max = np.r_[False, (spectrum[1:-1] > spectrum[:-2]) & (spectrum[1:-1] >= spectrum[2:]), False]
    peaks = np.flatnonzero(in_range & local_max & (spectrum > 0.1 * spectrum.max()))
    top3 = peaks[np.argsort(spectrum[peaks])[::-1][:3]]
    assert {pitch_class_of(freqs[i]) for i in top3} <= {0, 4, 7}  # C, E, G


def test_tonal_onsets_on_beat_grid():
    bpm = 100
    clip = tonal("C", "major", bpm, 6.0, seed=2)
    period = beat_period_samples(bpm)
    # Each beat slot must start within the 20 ms attack of a note.
    attack = int(0.02 * SR)
    for onset in range(0, len(clip) - period, period):
        assert np.abs(clip.samples[onset : onset + attack + period // 4]).max() > 0


def test_noise_texture_deterministic_and_colored():
    a = noise_texture("pink", 4.0, seed=3)
    b = noise_texture("pink", 4.0, seed=3)
    assert np.array_equal(a.samples, b.samples)

    def centroid(clip):
        spec = np.abs(np.fft.rfft(clip.samples))
        freqs = np.fft.rfftfreq(len(clip.samples), 1 / SR)
        return float((spec @ freqs) / spec.sum())

    white = noise_texture("white", 4.0, seed=3)
    brown = noise_texture("brown", 4.0, seed=3)
    assert centroid(brown) < centroid(a) < centroid(white)


def test_domain_errors():
    with pytest.raises(DomainError):
        click_track(30, 4.0)
    with pytest.raises(DomainError):
        click_track(250, 4.0)
    with pytest.raises(DomainError):
        tonal("H", "major", 100, 4.0)
    with pytest.raises(DomainError):
        tonal("C", "dorian", 100, 4.0)
    with pytest.raises(DomainError):
        noise_texture("purple", 4.0)
    with pytest.raises(DomainError):
        synth_fixture("granular", 4.0)
    with pytest.raises(DomainError):
        synth_fixture("click_track", 4.0)  # bpm missing


def test_pitch_class_aliases():
    assert pitch_class_index("Db") == pitch_class_index("C#") == 1
    assert pitch_class_index(11) == pitch_class_index("B")
    with pytest.raises(DomainError):
        pitch_class_index(12)


def test_fixture_spec_renders():
    spec = FixtureSpec(kind="tonal", key="G", scale="minor", bpm=110, duration=2.0, seed=4)
    clip = spec.render()
    assert clip.duration == pytest.approx(2.0)
    assert clip.peak() <= 0.9 + 1e-9
