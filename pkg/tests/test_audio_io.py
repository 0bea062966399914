import struct

import numpy as np
import pytest
from scipy.io import wavfile

from melbind.audio import AudioClip, read_wav, write_wav
from melbind.errors import AudioFormatError, UnsupportedAudioError

SR = 16000


def sine(freq, seconds, sr=SR, amp=1.0):
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), sr)


def test_silence_roundtrip_identity(tmp_path):
    clip = AudioClip(np.zeros(SR), SR)
    write_wav(clip, tmp_path / "s.wav")
    back = read_wav(tmp_path / "s.wav")
    assert back.sample_rate == SR
    assert np.array_equal(back.samples, np.zeros(SR))


def test_sine_roundtrip_quantization_bound(tmp_path):
    clip = sine(440, 1.0)
    write_wav(clip, tmp_path / "t.wav")
    back = read_wav(tmp_path / "t.wav")
    assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768


def test_float32_roundtrip(tmp_path):
    clip = sine(440, 0.5, amp=0.25)
    write_wav(clip, tmp_path / "f.wav", subtype="float32")
    back = read_wav(tmp_path / "f.wav")
    assert np.max(np.abs(back.samples - clip.samples)) <= 1e-7


def test_resample_preserves_duration_and_frequency(tmp_path):
    # 1 s of a 1000 Hz tone at 44.1 kHz; after reading, the 16000-sample FFT
    # has exactly 1 Hz bins, an independent check of the resampler.
    sr_in = 44100
    t = np.arange(sr_in) / sr_in
    data = (0.5 * np.sin(2 * np.pi * 1000 * t)).astype(np.float32)
    wavfile.write(tmp_path / "hi.wav", sr_in, data)

    clip = read_wav(tmp_path / "hi.wav")
    assert clip.sample_rate == SR
    assert abs(clip.duration - 1.0) <= 1e-3
    spectrum = np.abs(np.fft.rfft(clip.samples))
    peak_hz = np.fft.rfftfreq(len(clip.samples), 1 / SR)[np.argmax(spectrum)]
    assert abs(peak_hz - 1000.0) <= 1.0


def test_stereo_averaged_to_mono(tmp_path):
    left = 0.5 * np.ones(SR // 2, dtype=np.float32)
    right = np.zeros(SR // 2, dtype=np.float32)
    wavfile.write(tmp_path / "st.wav", SR, np.stack([left, right], axis=1))
    clip = read_wav(tmp_path / "st.wav")
    assert np.allclose(clip.samples, 0.25, atol=1e-6)


def test_malformed_header_raises_format_error(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF" + b"\x00" * 40)
    with pytest.raises(AudioFormatError):
        read_wav(bad)


def test_mulaw_codec_unsupported(tmp_path):
    # Minimal RIFF/WAVE header with format tag 7 (mu-law).
    path = tmp_path / "ulaw.wav"
    n = 64
    header = b"RIFF" + struct.pack("<I", 36 + n) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 7, 1, 8000, 8000, 1, 8)
    data = b"data" + struct.pack("<I", n) + b"\x00" * n
    path.write_bytes(header + fmt + data)
    with pytest.raises(UnsupportedAudioError):
        read_wav(path)


def test_int32_subtype_unsupported(tmp_path):
    wavfile.write(tmp_path / "i32.wav", SR, np.zeros(100, dtype=np.int32))
    with pytest.raises(UnsupportedAudioError):
        read_wav(tmp_path / "i32.wav")


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")
