"""Waveform preprocessing: sensor transfer-function removal, HHT denoising,
and max-energy channel selection.

The sensing chain is modeled as a flat filter+amplifier gain times a sensor
frequency response; deconvolution divides it out in the frequency domain with
a magnitude floor at response nulls. Denoising decomposes the waveform into
IMFs and keeps the significant interior modes, dropping the first mode
(high-frequency noise) and the last mode plus residual (slow trend).
"""

import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .emd import DEFAULT_MAX_IMFS, DEFAULT_SIFT_CAP, DEFAULT_SIFT_TOLERANCE, emd_decompose
from .errors import ModelLengthMismatchError, TooFewIMFsWarning
from .spectral import TimeSeries, next_pow2

DEFAULT_PCC_THRESHOLD = 0.1
DEFAULT_RESONANCE_HZ = 150e3  # piezo transducer peak
DEFAULT_RESONANCE_Q = 2.0
DEFAULT_FLAT_GAIN = 100.0  # 40 dB preamplifier
DEFAULT_FLOOR_EPSILON = 1e-6


@dataclass(frozen=True)
class TransducerModel:
    """Frequency response of the sensing chain on a full two-sided DFT grid.

    Attributes
    ----------
    response : complex ndarray
        Sensor response per frequency bin, Hermitian-symmetric.
    ups : float
        Flat combined filter+amplifier gain, > 0.
    floor_epsilon : float
        Relative magnitude floor applied when dividing by the response.
    """

    response: np.ndarray
    ups: float = DEFAULT_FLAT_GAIN
    floor_epsilon: float = DEFAULT_FLOOR_EPSILON

    def __post_init__(self):
        arr = np.asarray(self.response, dtype=np.complex128)
        arr.flags.writeable = False
        object.__setattr__(self, "response", arr)
        if not self.ups > 0:
            raise ValueError("ups must be positive")
        if not self.floor_epsilon > 0:
            raise ValueError("floor_epsilon must be positive")

    def __len__(self):
        return self.response.shape[0]

    @classmethod
    def flat(cls, n_bins: int, ups: float = 1.0, floor_epsilon: float = DEFAULT_FLOOR_EPSILON):
        return cls(response=np.ones(n_bins, dtype=np.complex128), ups=ups,
                   floor_epsilon=floor_epsilon)

    @classmethod
    def resonant(
        cls,
        n_bins: int,
        sample_rate: float,
        peak_hz: float = DEFAULT_RESONANCE_HZ,
        q: float = DEFAULT_RESONANCE_Q,
        ups: float = DEFAULT_FLAT_GAIN,
        floor_epsilon: float = DEFAULT_FLOOR_EPSILON,
    ):
        """Second-order bandpass response peaking at peak_hz, unit peak gain."""
        f = np.fft.fftfreq(n_bins, d=1.0 / sample_rate)
        u = f / peak_hz
        h = (1j * u / q) / (1.0 - u**2 + 1j * u / q)
        if n_bins % 2 == 0:
            # keep the response Hermitian: the Nyquist bin must be real
            h[n_bins // 2] = h[n_bins // 2].real
        return cls(response=h, ups=ups, floor_epsilon=floor_epsilon)

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        pairs = np.asarray(doc["response"], dtype=np.float64)
        response = pairs[:, 0] + 1j * pairs[:, 1]
        return cls(response=response, ups=float(doc["ups"]),
                   floor_epsilon=float(doc["floor_epsilon"]))

    def to_json(self, path):
        doc = {
            "ups": self.ups,
            "floor_epsilon": self.floor_epsilon,
            "response": [[float(c.real), float(c.imag)] for c in self.response],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    def apply(self, x: TimeSeries) -> TimeSeries:
        """Forward-color a signal with the sensing chain (for synthesis)."""
        n = next_pow2(len(x))
        if len(self) != n:
            raise ModelLengthMismatchError(
                f"model has {len(self)} bins, transform size is {n}"
            )
        spec = np.fft.fft(np.pad(x.samples, (0, n - len(x))))
        colored = np.fft.ifft(spec * self.ups * self.response).real[: len(x)]
        return TimeSeries(colored, x.sample_rate)


def deconvolve_tfr(r: TimeSeries, model: TransducerModel) -> TimeSeries:
    """Remove the sensing-chain response: S(f) = R(f) / (ups * W_s(f)).

    The divisor magnitude is floored at floor_epsilon * max|W_s| so response
    nulls cannot blow up; phase is kept where the response is nonzero.
    """
    n = next_pow2(len(r))
    if len(model) != n:
        raise ModelLengthMismatchError(
            f"model has {len(model)} bins, transform size is {n}"
        )
    spec = np.fft.fft(np.pad(r.samples, (0, n - len(r))))
    mag = np.abs(model.response)
    floor = model.floor_epsilon * mag.max()
    if floor == 0.0:
        raise ValueError("model response is identically zero")
    safe = np.where(
        mag >= floor,
        model.response,
        np.where(mag > 0, model.response * (floor / np.maximum(mag, 1e-300)), floor),
    )
    recovered = np.fft.ifft(spec / (model.ups * safe)).real[: len(r)]
    return TimeSeries(recovered, r.sample_rate)


def hht_denoise(
    x: TimeSeries,
    pcc_threshold: float = DEFAULT_PCC_THRESHOLD,
    max_imfs: int = DEFAULT_MAX_IMFS,
    sift_tolerance: float = DEFAULT_SIFT_TOLERANCE,
    sift_cap: int = DEFAULT_SIFT_CAP,
) -> TimeSeries:
    """Denoise and detrend by IMF selection.

    Keeps interior IMFs (drops the first mode and the last mode plus
    residual) whose |Pearson correlation| with the input reaches
    pcc_threshold. With fewer than 3 IMFs the input is returned unchanged
    and a TooFewIMFsWarning is issued.
    """
    modes = emd_decompose(x, max_imfs=max_imfs, sift_tolerance=sift_tolerance,
                          sift_cap=sift_cap)
    if len(modes) < 3:
        warnings.warn(
            f"only {len(modes)} IMFs extracted; returning input unchanged",
            TooFewIMFsWarning,
            stacklevel=2,
        )
        return x
    kept = [
        imf.samples
        for imf, sig in zip(modes.imfs[1:-1], modes.significance[1:-1])
        if abs(sig) >= pcc_threshold
    ]
    if kept:
        out = np.sum(kept, axis=0)
    else:
        out = np.zeros(len(x))
    return TimeSeries(out, x.sample_rate)


@dataclass(frozen=True)
class RawEvent:
    """Multi-channel transducer recording of one acoustic-emission event."""

    channels: tuple
    event_id: int = 0
    trigger_time: float = 0.0

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("event needs at least one channel")
        n, fs = len(chans[0]), chans[0].sample_rate
        for ch in chans[1:]:
            if len(ch) != n or ch.sample_rate != fs:
                raise ValueError("all channels must share length and sample rate")
        object.__setattr__(self, "channels", chans)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def sample_rate(self) -> float:
        return self.channels[0].sample_rate


@dataclass(frozen=True)
class ProcessedEvent:
    """Single best-channel denoised waveform for one event.

    source_channel is 1-based, matching hardware channel labels.
    """

    waveform: TimeSeries
    source_channel: int
    energy: float
    event_id: int = 0
    label: Optional[int] = None


def select_max_energy_channel(
    event: RawEvent,
    model: Optional[TransducerModel] = None,
    pcc_threshold: float = DEFAULT_PCC_THRESHOLD,
    max_imfs: int = DEFAULT_MAX_IMFS,
    sift_tolerance: float = DEFAULT_SIFT_TOLERANCE,
    label: Optional[int] = None,
) -> ProcessedEvent:
    """Deconvolve and denoise each channel, keep the most energetic result.

    Ties break toward the lowest channel number. Per-channel failures are
    tolerated unless every channel fails. model=None uses the default
    resonant transducer model on the event's transform grid.
    """
    if model is None:
        model = TransducerModel.resonant(
            next_pow2(len(event.channels[0])), event.sample_rate
        )
    best = None
    best_energy = -np.inf
    errors = []
    for k, channel in enumerate(event.channels):
        try:
            recovered = deconvolve_tfr(channel, model)
            denoised = hht_denoise(
                recovered,
                pcc_threshold=pcc_threshold,
                max_imfs=max_imfs,
                sift_tolerance=sift_tolerance,
            )
        except Exception as exc:  # noqa: BLE001 - per-channel isolation
            errors.append((k + 1, exc))
            continue
        energy = denoised.energy
        if energy > best_energy:
            best = (denoised, k + 1, energy)
            best_energy = energy
    if best is None:
        raise errors[0][1]
    waveform, source_channel, energy = best
    return ProcessedEvent(
        waveform=waveform,
        source_channel=source_channel,
        energy=energy,
        event_id=event.event_id,
        label=label,
    )


class EventPreprocessor(TransformerMixin, BaseEstimator):
    """Stateless transformer from raw multi-channel events to best-channel
    denoised waveforms.

    model=None builds the default resonant transducer model on each event's
    transform grid. Accepts RawEvent or LabeledEvent inputs.
    """

    def __init__(self, model=None, pcc_threshold=DEFAULT_PCC_THRESHOLD,
                 max_imfs=DEFAULT_MAX_IMFS, sift_tolerance=DEFAULT_SIFT_TOLERANCE):
        self.model = model
        self.pcc_threshold = pcc_threshold
        self.max_imfs = max_imfs
        self.sift_tolerance = sift_tolerance

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        out = []
        for item in X:
            raw = getattr(item, "event", item)
            label = getattr(item, "label", None)
            out.append(select_max_energy_channel(
                raw, self.model, pcc_threshold=self.pcc_threshold,
                max_imfs=self.max_imfs, sift_tolerance=self.sift_tolerance,
                label=None if label is None else int(label),
            ))
        return out
