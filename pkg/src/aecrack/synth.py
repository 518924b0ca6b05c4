"""Labeled synthetic acoustic-emission events for training and evaluation.

Three crack classes with distinct wave phenomenology:

* tensile: energy mostly in a fast-rising higher-band P wavelet arriving
  first, plus a train of short broadband micro-transients;
* shear: energy mostly in a slow-rising lower-band S wavelet arriving later,
  with only a couple of transients;
* mixed mode: balanced P/S energy plus a sustained narrowband component that
  keeps the envelope locally stationary.

Events carry 5 channels that differ only by attenuation and an integer
(circular) delay; a zero-padded delay would put a step at the channel head
that the deconvolution stage smears into broadband ripple. All randomness
flows from one master seed through a counter-based Philox generator keyed
per event, so datasets are bit-reproducible.
"""

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from .preprocess import RawEvent, TransducerModel
from .spectral import TimeSeries, next_pow2


class CrackClass(IntEnum):
    TENSILE = 0
    SHEAR = 1
    MIXED = 2


CLASS_NAMES = {
    CrackClass.TENSILE: "tensile",
    CrackClass.SHEAR: "shear",
    CrackClass.MIXED: "mixed",
}
NAME_TO_CLASS = {v: k for k, v in CLASS_NAMES.items()}


def _default_ratios():
    return {
        CrackClass.TENSILE: (3.0, 8.0),
        CrackClass.SHEAR: (1.0 / 8.0, 1.0 / 3.0),
        CrackClass.MIXED: (0.7, 1.4),
    }


def _default_rise_times():
    return {
        CrackClass.TENSILE: 15e-6,
        CrackClass.SHEAR: 150e-6,
        CrackClass.MIXED: 60e-6,
    }


def _default_transients():
    return {
        CrackClass.TENSILE: (5, 15),
        CrackClass.SHEAR: (1, 3),
        CrackClass.MIXED: (0, 1),
    }


def _default_transient_level():
    # micro-displacements carry the tensile in-band signature; for the other
    # classes they are minor wiggles on the dominant wave
    return {
        CrackClass.TENSILE: 1.0,
        CrackClass.SHEAR: 0.15,
        CrackClass.MIXED: 0.2,
    }


def _default_subpulses():
    # a shear rupture is a cascade of asperity slips at scattered carriers,
    # which spreads its spectrum across the band; the other classes emit a
    # single coherent wave
    return {
        CrackClass.TENSILE: (1, 1),
        CrackClass.SHEAR: (3, 6),
        CrackClass.MIXED: (1, 2),
    }


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; per-class dicts are keyed by CrackClass."""

    sample_rate: float = 5e6
    duration: int = 16384
    n_channels: int = 5
    p_freq_range: tuple = (25e3, 50e3)
    s_freq_range: tuple = (5e3, 22e3)
    energy_ratio: dict = field(default_factory=_default_ratios)
    rise_time: dict = field(default_factory=_default_rise_times)
    n_transients: dict = field(default_factory=_default_transients)
    transient_level: dict = field(default_factory=_default_transient_level)
    s_subpulses: dict = field(default_factory=_default_subpulses)
    decay_tau: float = 500e-6
    snr_db: float = 12.0
    noise_band: tuple = (2e3, 400e3)
    attenuation_range: tuple = (0.3, 1.0)
    max_delay: int = 50
    transient_band: tuple = (6e3, 30e3)
    tone_band: tuple = (9e3, 13e3)
    tone_level: float = 1.8
    apply_sensor: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.duration < 64 or self.sample_rate <= 0:
            raise ValueError("invalid duration or sample rate")
        for lo, hi in self.energy_ratio.values():
            if not 0 < lo < hi:
                raise ValueError("energy ratio ranges must be positive and ordered")
        if not self.rise_time[CrackClass.TENSILE] < self.rise_time[CrackClass.SHEAR]:
            raise ValueError("tensile rise time must be below shear rise time")


@dataclass(frozen=True)
class GroundTruth:
    """The per-event parameter draw, kept for oracles and reproducibility."""

    f_p: float
    f_s: float
    t_p: float
    t_s: float
    energy_ratio: float
    amplitude: float
    n_transients: int
    attenuations: np.ndarray
    delays: np.ndarray
    master: np.ndarray
    p_wave: Optional[np.ndarray] = None
    s_wave: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LabeledEvent:
    event: RawEvent
    label: CrackClass
    ground_truth: GroundTruth


@dataclass(frozen=True)
class LabeledDataset:
    events: tuple

    def __len__(self):
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def __iter__(self):
        return iter(self.events)

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(e.label) for e in self.events])


def event_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-event generator: Philox keyed by (seed, index)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), int(index)]))
    )


def _wavelet(t: np.ndarray, t0: float, freq: float, rise: float, decay: float,
             phase: float, chirp: float = 0.0) -> np.ndarray:
    """Carrier under an exponential rise/decay envelope starting at t0.

    The squared rise term keeps the onset C1-smooth; a slope discontinuity
    there would leave broadband spectral tails that the transfer-function
    removal re-amplifies into a high-frequency ripple carpet. chirp is a
    linear frequency drift in Hz/s applied along the wavelet.
    """
    tau = t - t0
    active = tau > 0
    out = np.zeros_like(t)
    ta = tau[active]
    out[active] = (
        (1.0 - np.exp(-ta / rise)) ** 2
        * np.exp(-ta / decay)
        * np.cos(2.0 * np.pi * (freq + 0.5 * chirp * ta) * ta + phase)
    )
    return out


def _unit_energy(x: np.ndarray) -> np.ndarray:
    e = np.dot(x, x)
    if e == 0.0:
        return x
    return x / np.sqrt(e)


def band_limited_noise(rng: np.random.Generator, n: int, sample_rate: float,
                       band: tuple) -> np.ndarray:
    """Unit-variance Gaussian noise restricted to a frequency band."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[(f < band[0]) | (f > band[1])] = 0.0
    out = np.fft.irfft(spec, n)
    sd = out.std()
    return out / sd if sd > 0 else out


_sensor_cache = {}


def _sensor(n: int, sample_rate: float) -> TransducerModel:
    key = (n, sample_rate)
    if key not in _sensor_cache:
        _sensor_cache[key] = TransducerModel.resonant(n, sample_rate)
    return _sensor_cache[key]


def generate_event(
    crack_class: CrackClass,
    cfg: SynthConfig = SynthConfig(),
    rng=None,
    event_id: int = 0,
    keep_components: bool = False,
) -> LabeledEvent:
    """Draw one labeled multi-channel event of the given class."""
    if rng is None:
        rng = event_rng(cfg.seed, event_id)
    crack_class = CrackClass(crack_class)
    n = cfg.duration
    fs = cfg.sample_rate
    t = np.arange(n) / fs
    horizon = n / fs

    f_p = rng.uniform(*cfg.p_freq_range)
    f_s = rng.uniform(*cfg.s_freq_range)
    t_p = rng.uniform(0.04, 0.12) * horizon
    t_s = t_p + rng.uniform(0.08, 0.25) * horizon
    rise = cfg.rise_time[crack_class]
    p_wave = _unit_energy(
        _wavelet(t, t_p, f_p, 0.5 * rise, cfg.decay_tau, rng.uniform(0, 2 * np.pi))
    )
    # the shear component rises slowly and rings long, so in-band it is
    # spread over many analysis frames; it arrives as a cascade of sub-pulses
    # at scattered carriers, which also spreads it across frequency bins
    s_decay = 4.0 * cfg.decay_tau
    lo_sp, hi_sp = cfg.s_subpulses[crack_class]
    n_sub = int(rng.integers(lo_sp, hi_sp + 1))
    s_wave = np.zeros_like(t)
    for j in range(n_sub):
        f_j = f_s if n_sub == 1 else rng.uniform(*cfg.s_freq_range)
        t_j = t_s + j * rng.uniform(0.02, 0.06) * horizon
        s_wave += _wavelet(t, t_j, f_j, 2.0 * rise, s_decay,
                           rng.uniform(0, 2 * np.pi))
    s_wave = _unit_energy(s_wave)
    ratio = rng.uniform(*cfg.energy_ratio[crack_class])
    amplitude = rng.uniform(0.5, 2.0)
    # unit-energy wavelets scaled so that E_P/E_S equals the drawn ratio
    p_wave = p_wave * amplitude * np.sqrt(ratio)
    s_wave = s_wave * amplitude

    clean = p_wave + s_wave
    lo_k, hi_k = cfg.n_transients[crack_class]
    n_tr = int(rng.integers(lo_k, hi_k + 1))
    level = cfg.transient_level[crack_class]
    for _ in range(n_tr):
        t0 = rng.uniform(t_p, 0.88 * horizon)
        freq = rng.uniform(*cfg.transient_band)
        decay = rng.uniform(25e-6, 80e-6)
        burst = _unit_energy(
            _wavelet(t, t0, freq, 3e-6, decay, rng.uniform(0, 2 * np.pi))
        )
        clean = clean + burst * amplitude * level * rng.uniform(0.7, 1.3)
    if crack_class is CrackClass.MIXED:
        tone_f = rng.uniform(*cfg.tone_band)
        start = t_p + rng.uniform(0.05, 0.1) * horizon
        ramp = 1.0 / (1.0 + np.exp(-(t - start) / 40e-6))
        tone = ramp * np.cos(2.0 * np.pi * tone_f * t + rng.uniform(0, 2 * np.pi))
        clean = clean + _unit_energy(tone) * amplitude * cfg.tone_level

    # fade the deterministic components out at the record tail: an abrupt
    # truncation of ringing waves wraps through the circular sensor/inverse
    # filters and smears a broadband ripple carpet over the whole record
    fade_len = max(16, n // 32)
    fade = 0.5 * (1.0 + np.cos(np.linspace(0.0, np.pi, fade_len)))
    clean[-fade_len:] *= fade

    noise = band_limited_noise(rng, n, fs, cfg.noise_band)
    clean_power = np.dot(clean, clean) / n
    noise_power = clean_power / (10.0 ** (cfg.snr_db / 10.0))
    acoustic = clean + noise * np.sqrt(noise_power)

    if cfg.apply_sensor:
        model = _sensor(next_pow2(n), fs)
        master = model.apply(TimeSeries(acoustic, fs)).samples
    else:
        master = acoustic

    attenuations = rng.uniform(*cfg.attenuation_range, size=cfg.n_channels)
    delays = rng.integers(0, cfg.max_delay + 1, size=cfg.n_channels)
    channels = [
        TimeSeries(a * np.roll(master, int(d)), fs)
        for a, d in zip(attenuations, delays)
    ]

    truth = GroundTruth(
        f_p=f_p, f_s=f_s, t_p=t_p, t_s=t_s, energy_ratio=ratio,
        amplitude=amplitude, n_transients=n_tr,
        attenuations=attenuations, delays=delays, master=master,
        p_wave=p_wave if keep_components else None,
        s_wave=s_wave if keep_components else None,
    )
    return LabeledEvent(
        event=RawEvent(channels=tuple(channels), event_id=event_id),
        label=crack_class,
        ground_truth=truth,
    )


def dataset_labels(n_per_class: int, seed: int) -> np.ndarray:
    """Balanced label sequence shuffled by a seeded permutation."""
    labels = np.repeat(np.arange(3), n_per_class)
    order = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), 0xD5]))
    ).permutation(labels.shape[0])
    return labels[order]


def iter_dataset(n_per_class: int, cfg: SynthConfig = SynthConfig(),
                 keep_components: bool = False):
    """Yield the events of generate_dataset one at a time (same order)."""
    labels = dataset_labels(n_per_class, cfg.seed)
    for i, lab in enumerate(labels):
        yield generate_event(CrackClass(int(lab)), cfg, event_id=i,
                             keep_components=keep_components)


def generate_dataset(n_per_class: int, cfg: SynthConfig = SynthConfig()) -> LabeledDataset:
    """Balanced, seeded dataset of 3 * n_per_class events."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    return LabeledDataset(events=tuple(iter_dataset(n_per_class, cfg)))


def _rebuild_channels(master: np.ndarray, truth: GroundTruth, fs: float):
    return tuple(
        TimeSeries(a * np.roll(master, int(d)), fs)
        for a, d in zip(truth.attenuations, truth.delays)
    )


def augment(event: LabeledEvent, rng: np.random.Generator,
            cfg: SynthConfig = SynthConfig()) -> LabeledEvent:
    """Label-preserving augmentation: time shift, amplitude scale, or re-noise.

    The transform is applied to the shared master waveform and the channels
    are rebuilt with the original attenuations and delays.
    """
    truth = event.ground_truth
    master = truth.master.copy()
    n = master.shape[0]
    fs = event.event.sample_rate
    kind = rng.integers(0, 3)
    if kind == 0:
        shift = int(rng.integers(1, max(2, int(0.05 * n) + 1)))
        if rng.integers(0, 2):
            shift = -shift
        master = np.roll(master, shift)
    elif kind == 1:
        master = master * rng.uniform(0.7, 1.3)
    else:
        snr = cfg.snr_db + rng.uniform(-3.0, 3.0)
        power = np.dot(master, master) / n
        extra = band_limited_noise(rng, n, fs, cfg.noise_band)
        master = master + extra * np.sqrt(power / 10.0 ** (snr / 10.0))
    new_truth = replace(truth, master=master)
    return LabeledEvent(
        event=RawEvent(channels=_rebuild_channels(master, new_truth, fs),
                       event_id=event.event.event_id),
        label=event.label,
        ground_truth=new_truth,
    )
