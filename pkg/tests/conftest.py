import numpy as np
import pytest

from aecrack.spectral import TimeSeries

FS = 5e6


def tone(freq, n, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(n) / fs
    return TimeSeries(amp * np.cos(2 * np.pi * freq * t + phase), fs)


def grid_tone(k, n, fs=FS, amp=1.0):
    """Cosine whose frequency sits exactly on DFT bin k of an n-point grid."""
    return tone(k * fs / n, n, fs, amp)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
