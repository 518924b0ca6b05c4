"""Core spectral transforms: analytic signal, DFT, power spectrum, STFT.

All transforms run in 64-bit floats. Whole-signal transforms zero-pad to the
next power of two; framewise transforms use the window length as the DFT size.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroSignalError,
    SignalTooShortError,
    WindowTooLongError,
    ZeroHopError,
)
from .validation import check_waveform

DEFAULT_SAMPLE_RATE = 5e6  # Hz, multi-channel DAQ rate

_WINDOWS = {
    "hann": lambda n: np.hanning(n),
    "rect": lambda n: np.ones(n),
}


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    if n < 1:
        raise ValueError("n must be positive")
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled real waveform.

    Parameters
    ----------
    samples : array_like
        Real amplitudes (volts after gain normalization).
    sample_rate : float
        Samples per second, > 0.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = check_waveform(self.samples)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def energy(self) -> float:
        """Sum of squared samples."""
        return float(np.dot(self.samples, self.samples))

    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate


@dataclass(frozen=True)
class AnalyticSignal:
    """Complex analytic signal with derived envelope and unwrapped phase."""

    values: np.ndarray
    sample_rate: float

    @property
    def envelope(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        """Instantaneous phase, unwrapped by 2-pi jumps."""
        return np.unwrap(np.angle(self.values))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Full two-sided DFT coefficients on a power-of-two grid."""

    bins: np.ndarray
    bin_width: float

    def __len__(self):
        return self.bins.shape[0]

    def frequencies(self) -> np.ndarray:
        n = len(self)
        return np.fft.fftfreq(n, d=1.0 / (n * self.bin_width))


@dataclass(frozen=True)
class STFTGrid:
    """Short-time Fourier transform frames, shape (n_frames, window_length).

    Each row is the full two-sided DFT of one windowed segment, so the
    frequency resolution of every column is sample_rate / window_length.
    """

    frames: np.ndarray
    window_length: int
    hop: int
    sample_rate: float
    window_kind: str = "hann"

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_onesided(self) -> int:
        return self.window_length // 2 + 1

    def frequencies(self) -> np.ndarray:
        """One-sided frequency axis for frame columns [0, window//2]."""
        return np.arange(self.n_onesided) * (self.sample_rate / self.window_length)

    def onesided(self) -> np.ndarray:
        """Non-negative-frequency columns, shape (n_frames, window//2 + 1)."""
        return self.frames[:, : self.n_onesided]


def dft(x: np.ndarray) -> np.ndarray:
    """Forward DFT; size must be handled by the caller (no implicit padding)."""
    return np.fft.fft(np.asarray(x))


def idft(X: np.ndarray) -> np.ndarray:
    """Inverse DFT, complex output; callers take .real for real signals."""
    return np.fft.ifft(np.asarray(X))


def _padded(x: np.ndarray) -> np.ndarray:
    n = next_pow2(x.shape[0])
    if n == x.shape[0]:
        return x
    out = np.zeros(n, dtype=np.float64)
    out[: x.shape[0]] = x
    return out


def analytic_signal(x: TimeSeries) -> AnalyticSignal:
    """Analytic signal z = x + j*H{x} via the frequency-domain construction.

    Zero-pads to the next power of two, zeroes negative frequencies, doubles
    positive frequencies (DC and Nyquist kept), inverse-transforms and
    truncates back to the input length. The real part equals the input.
    """
    if len(x) < 4:
        raise SignalTooShortError(f"analytic signal needs >= 4 samples, got {len(x)}")
    if not np.any(x.samples):
        raise AllZeroSignalError("phase of the all-zero signal is undefined")
    padded = _padded(x.samples)
    n = padded.shape[0]
    spec = np.fft.fft(padded)
    gain = np.zeros(n)
    gain[0] = 1.0
    gain[n // 2] = 1.0
    gain[1 : n // 2] = 2.0
    z = np.fft.ifft(spec * gain)[: len(x)]
    return AnalyticSignal(values=z, sample_rate=x.sample_rate)


def spectrum(x: TimeSeries) -> Spectrum:
    """Full two-sided DFT of the zero-padded signal."""
    padded = _padded(x.samples)
    bins = np.fft.fft(padded)
    return Spectrum(bins=bins, bin_width=x.sample_rate / padded.shape[0])


def power_spectrum(x: TimeSeries) -> np.ndarray:
    """One-sided power |X(f)|^2 for f in [0, fs/2], length N/2 + 1.

    N is the padded transform size. Parseval holds against the two-sided
    spectrum: sum(x^2) == (1/N) * sum(|X|^2).
    """
    padded = _padded(x.samples)
    bins = np.fft.rfft(padded)
    return np.abs(bins) ** 2


def frame_count(n_samples: int, window_length: int, hop: int) -> int:
    return (n_samples - window_length) // hop + 1


def stft(
    x: TimeSeries,
    window_length: int = 256,
    hop: int = 128,
    window_kind: str = "hann",
) -> STFTGrid:
    """Short-time Fourier transform with the given window and hop.

    Frames start at multiples of `hop`; each frame is the DFT of the
    windowed segment, so frame count = floor((N - W)/hop) + 1.
    """
    if hop < 1:
        raise ZeroHopError("hop must be >= 1 sample")
    if window_length > len(x):
        raise WindowTooLongError(
            f"window of {window_length} exceeds signal length {len(x)}"
        )
    try:
        win = _WINDOWS[window_kind](window_length)
    except KeyError:
        raise ValueError(f"unknown window kind {window_kind!r}") from None
    n_frames = frame_count(len(x), window_length, hop)
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window_length)[None, :]
    segments = x.samples[idx] * win[None, :]
    frames = np.fft.fft(segments, axis=1)
    return STFTGrid(
        frames=frames,
        window_length=window_length,
        hop=hop,
        sample_rate=x.sample_rate,
        window_kind=window_kind,
    )
