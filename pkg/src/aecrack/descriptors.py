"""Statistical event descriptors and descriptor-matrix assembly.

Four descriptors summarize each preprocessed waveform: instantaneous
frequency (time derivative of the analytic phase), framewise spectral entropy
(normalized Shannon entropy of the power distribution), spectral kurtosis per
frequency bin (normalized fourth moment of STFT magnitudes, 0 for stationary
Gaussian noise), and the spectral L2/L1 norm per frame (RMS over mean of the
squared analytic envelope). Every row is resampled to a common length and
stacked into a per-event matrix according to the input configuration.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    EmptyDatasetError,
    EmptyInputError,
    TooFewFramesError,
    WindowTooLongError,
)
from .preprocess import ProcessedEvent
from .spectral import TimeSeries, analytic_signal, frame_count, stft
from .validation import check_fitted, check_gamma_batch

ROW_SIGNAL = "signal"
ROW_IF = "if"
ROW_SE = "se"
ROW_SK = "sk"
ROW_SLN = "sln"

#: Input configurations: which descriptor rows each lambda selects.
#: 0 is the full superset used as a sweep cache.
LAMBDA_ROWS = {
    0: (ROW_SIGNAL, ROW_IF, ROW_SE, ROW_SK, ROW_SLN),
    1: (ROW_SIGNAL,),
    2: (ROW_IF,),
    3: (ROW_IF, ROW_SE),
    4: (ROW_IF, ROW_SE, ROW_SK),
    5: (ROW_IF, ROW_SE, ROW_SK, ROW_SLN),
}

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class DescriptorConfig:
    """Extraction settings: common length, frame sizes, and analysis band."""

    n_ed: int = 256
    se_window: int = 1024
    se_hop: int = 512
    stft_window: int = 1024
    stft_hop: int = 256
    band_lo: float = 5e3
    band_hi: float = 50e3
    window_kind: str = "hann"

    def __post_init__(self):
        if self.n_ed < 8:
            raise ValueError("n_ed must be >= 8")
        if not 0 <= self.band_lo < self.band_hi:
            raise ValueError("need 0 <= band_lo < band_hi")
        if self.se_hop < 1 or self.stft_hop < 1:
            raise ValueError("hops must be >= 1")


@dataclass(frozen=True)
class DescriptorMatrix:
    """Per-event stack of descriptor rows, each of length n_ed."""

    event_id: int
    data: np.ndarray
    row_names: tuple
    lambda_id: int
    label: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(self.row_names):
            raise ValueError("data must be 2-D with one row per row name")
        if not np.all(np.isfinite(arr)):
            raise ValueError("descriptor rows must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n_ed(self) -> int:
        return self.data.shape[1]

    def row(self, name: str) -> np.ndarray:
        return self.data[self.row_names.index(name)]


def instantaneous_frequency(x: TimeSeries) -> np.ndarray:
    """Instantaneous frequency in Hz from the analytic-signal phase.

    Central differences of the unwrapped phase in the interior, one-sided at
    the ends, clamped to the physical band [0, fs/2].
    """
    phase = analytic_signal(x).phase
    fs = x.sample_rate
    out = np.empty(len(x))
    out[1:-1] = (phase[2:] - phase[:-2]) * (fs / (4.0 * np.pi))
    out[0] = (phase[1] - phase[0]) * (fs / (2.0 * np.pi))
    out[-1] = (phase[-1] - phase[-2]) * (fs / (2.0 * np.pi))
    return np.clip(out, 0.0, fs / 2.0)


def entropy_of_power(power: np.ndarray) -> float:
    """Normalized Shannon entropy of a power distribution, in [0, 1].

    0*log(0) counts as 0; an all-zero distribution maps to 0 by convention.
    """
    total = power.sum()
    if total <= 0.0:
        return 0.0
    p = power / total
    nz = p[p > 0.0]
    n = power.shape[0]
    if n < 2:
        return 0.0
    return float(-(nz * np.log2(nz)).sum() / np.log2(n))


def _frame_starts(n: int, window: int, hop: int) -> np.ndarray:
    if window > n:
        raise WindowTooLongError(f"frame of {window} exceeds signal length {n}")
    return hop * np.arange(frame_count(n, window, hop))


def spectral_entropy(x: TimeSeries, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Framewise normalized spectral entropy, one value per frame."""
    starts = _frame_starts(len(x), cfg.se_window, cfg.se_hop)
    idx = starts[:, None] + np.arange(cfg.se_window)[None, :]
    power = np.abs(np.fft.rfft(x.samples[idx], axis=1)) ** 2
    return np.array([entropy_of_power(row) for row in power])


def spectral_entropy_global(x: TimeSeries) -> float:
    """Whole-signal normalized spectral entropy (one-sided padded spectrum)."""
    from .spectral import power_spectrum

    return entropy_of_power(power_spectrum(x))


def sk_frequencies(cfg: DescriptorConfig, sample_rate: float) -> np.ndarray:
    """One-sided frequency axis of the spectral-kurtosis output."""
    return np.arange(cfg.stft_window // 2 + 1) * (sample_rate / cfg.stft_window)


def spectral_kurtosis(x: TimeSeries, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Spectral kurtosis per one-sided frequency bin.

    kappa(f) = <|S(t,f)|^4>_t / <|S(t,f)|^2>_t^2 - 2, with the DC bin set to
    0 by convention. Stationary Gaussian noise gives 0; a constant-envelope
    tone gives -1.
    """
    grid = stft(x, cfg.stft_window, cfg.stft_hop, cfg.window_kind)
    if grid.n_frames < 8:
        raise TooFewFramesError(
            f"need >= 8 frames for spectral kurtosis, got {grid.n_frames}"
        )
    mag2 = np.abs(grid.onesided()) ** 2
    m2 = mag2.mean(axis=0)
    m4 = (mag2**2).mean(axis=0)
    kappa = np.zeros_like(m2)
    nz = m2 > 0.0
    kappa[nz] = m4[nz] / m2[nz] ** 2 - 2.0
    kappa[0] = 0.0
    return kappa


def band_mean(values: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> float:
    """Mean of values over frequency bins within [lo, hi]."""
    sel = (freqs >= lo) & (freqs <= hi)
    if not np.any(sel):
        raise ValueError(f"no frequency bins inside [{lo}, {hi}] Hz")
    return float(values[sel].mean())


def spectral_envelope(x: TimeSeries) -> np.ndarray:
    """Squared magnitude of the analytic signal, SEV(n) = |z(n)|^2."""
    z = analytic_signal(x).values
    return (z * z.conj()).real


def sln_of_envelope(sev: np.ndarray) -> float:
    """RMS-over-mean of a squared-envelope frame; 1.0 for an all-zero frame."""
    mean = sev.mean()
    if mean == 0.0:
        return 1.0
    rms = np.sqrt((sev * sev).mean())
    return float(rms / mean)


def spectral_l2l1_norm(x: TimeSeries, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Framewise spectral L2/L1 norm of the squared analytic envelope.

    Always >= 1, with equality exactly for a constant envelope; tends to
    sqrt(2) for a complex-Gaussian (exponential-envelope) signal.
    """
    sev = spectral_envelope(x)
    starts = _frame_starts(sev.shape[0], cfg.stft_window, cfg.stft_hop)
    return np.array(
        [sln_of_envelope(sev[s : s + cfg.stft_window]) for s in starts]
    )


def resample_descriptor(values: Sequence[float], n_ed: int) -> np.ndarray:
    """Linear interpolation onto n_ed uniformly spaced positions.

    Endpoints are preserved exactly; a length-n_ed input passes through
    unchanged.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("cannot resample an empty sequence")
    if arr.size == 1:
        return np.full(n_ed, arr[0])
    if arr.size == n_ed:
        return arr.copy()
    positions = np.linspace(0.0, arr.size - 1.0, n_ed)
    return np.interp(positions, np.arange(arr.size), arr)


def build_gamma(
    event,
    lam: int = 5,
    cfg: DescriptorConfig = DescriptorConfig(),
) -> DescriptorMatrix:
    """Assemble the descriptor matrix for one event under configuration lam.

    Accepts a ProcessedEvent or a bare TimeSeries. SK rows are restricted to
    the [band_lo, band_hi] analysis band before resampling.
    """
    if lam not in LAMBDA_ROWS:
        raise ValueError(f"unknown lambda configuration {lam!r}")
    if isinstance(event, ProcessedEvent):
        waveform, event_id, label = event.waveform, event.event_id, event.label
    else:
        waveform, event_id, label = event, 0, None
    if cfg.band_hi > waveform.sample_rate / 2.0:
        raise ValueError("band_hi exceeds the Nyquist frequency")
    names = LAMBDA_ROWS[lam]
    rows = np.empty((len(names), cfg.n_ed))
    for i, name in enumerate(names):
        if name == ROW_SIGNAL:
            native = waveform.samples
        elif name == ROW_IF:
            native = instantaneous_frequency(waveform)
        elif name == ROW_SE:
            native = spectral_entropy(waveform, cfg)
        elif name == ROW_SK:
            kappa = spectral_kurtosis(waveform, cfg)
            freqs = sk_frequencies(cfg, waveform.sample_rate)
            sel = (freqs >= cfg.band_lo) & (freqs <= cfg.band_hi)
            native = kappa[sel]
        else:
            native = spectral_l2l1_norm(waveform, cfg)
        rows[i] = resample_descriptor(native, cfg.n_ed)
    return DescriptorMatrix(
        event_id=event_id, data=rows, row_names=names, lambda_id=lam, label=label
    )


def slice_lambda(matrix: DescriptorMatrix, lam: int) -> DescriptorMatrix:
    """Select the rows of a superset matrix that configuration lam uses."""
    wanted = LAMBDA_ROWS[lam]
    missing = [n for n in wanted if n not in matrix.row_names]
    if missing:
        raise ValueError(f"matrix lacks rows {missing} needed by lambda {lam}")
    sel = [matrix.row_names.index(n) for n in wanted]
    return DescriptorMatrix(
        event_id=matrix.event_id,
        data=matrix.data[sel],
        row_names=wanted,
        lambda_id=lam,
        label=matrix.label,
    )


def _stack(dataset: Sequence[DescriptorMatrix]):
    if len(dataset) == 0:
        raise EmptyDatasetError("no descriptor matrices given")
    names = dataset[0].row_names
    for m in dataset:
        if m.row_names != names:
            raise ValueError("all matrices must share the same row set")
    return np.stack([m.data for m in dataset]), names


def fit_row_stats(dataset: Sequence[DescriptorMatrix]) -> dict:
    """Per row-type, per-position mean and std over a training collection."""
    stacked, names = _stack(dataset)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return {
        name: {"mean": mean[i].copy(), "std": std[i].copy()}
        for i, name in enumerate(names)
    }


def apply_row_stats(matrix: DescriptorMatrix, stats: dict) -> DescriptorMatrix:
    missing = [n for n in matrix.row_names if n not in stats]
    if missing:
        raise ValueError(f"stats lack rows {missing}")
    data = np.empty_like(matrix.data)
    for i, name in enumerate(matrix.row_names):
        data[i] = (matrix.data[i] - stats[name]["mean"]) / stats[name]["std"]
    return DescriptorMatrix(
        event_id=matrix.event_id,
        data=data,
        row_names=matrix.row_names,
        lambda_id=matrix.lambda_id,
        label=matrix.label,
    )


def standardize(dataset: Sequence[DescriptorMatrix], stats: Optional[dict] = None):
    """Standardize rows to zero mean and unit variance.

    Fit mode (stats=None) computes per row-type statistics on the given
    collection; transform mode applies the provided statistics. Returns the
    transformed collection and the statistics used.
    """
    if stats is None:
        stats = fit_row_stats(dataset)
    return [apply_row_stats(m, stats) for m in dataset], stats


def matrices_to_array(dataset: Sequence[DescriptorMatrix]):
    """Stack matrices into (X, y); unlabeled events get label -1."""
    stacked, _ = _stack(dataset)
    labels = np.array([-1 if m.label is None else m.label for m in dataset])
    return stacked, labels


class GammaExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from preprocessed events to descriptor matrices.

    Parameters mirror DescriptorConfig plus the input configuration `lam`.
    """

    def __init__(self, lam=5, n_ed=256, se_window=1024, se_hop=512,
                 stft_window=2048, stft_hop=256, band_lo=5e3, band_hi=50e3,
                 window_kind="hann"):
        self.lam = lam
        self.n_ed = n_ed
        self.se_window = se_window
        self.se_hop = se_hop
        self.stft_window = stft_window
        self.stft_hop = stft_hop
        self.band_lo = band_lo
        self.band_hi = band_hi
        self.window_kind = window_kind

    def _config(self) -> DescriptorConfig:
        return DescriptorConfig(
            n_ed=self.n_ed, se_window=self.se_window, se_hop=self.se_hop,
            stft_window=self.stft_window, stft_hop=self.stft_hop,
            band_lo=self.band_lo, band_hi=self.band_hi,
            window_kind=self.window_kind,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        cfg = self._config()
        return [build_gamma(event, self.lam, cfg) for event in X]


class DescriptorStandardizer(TransformerMixin, BaseEstimator):
    """Fit/transform standardization of descriptor rows.

    Accepts either a list of DescriptorMatrix or a 3-D array
    (events, rows, n_ed). Statistics are per row-type and position, computed
    on the fit collection only.
    """

    def fit(self, X, y=None):
        if isinstance(X, np.ndarray):
            arr = check_gamma_batch(X)
            self.mean_ = arr.mean(axis=0)
            self.std_ = np.maximum(arr.std(axis=0), STD_FLOOR)
            self.row_names_ = None
        else:
            stats = fit_row_stats(X)
            self.row_names_ = X[0].row_names
            self.mean_ = np.stack([stats[n]["mean"] for n in self.row_names_])
            self.std_ = np.stack([stats[n]["std"] for n in self.row_names_])
        return self

    def transform(self, X):
        check_fitted(self, "mean_")
        if isinstance(X, np.ndarray):
            arr = check_gamma_batch(X, n_rows=self.mean_.shape[0],
                                    n_ed=self.mean_.shape[1])
            return (arr - self.mean_) / self.std_
        stats = self.stats_dict()
        return [apply_row_stats(m, stats) for m in X]

    def stats_dict(self) -> dict:
        check_fitted(self, "mean_")
        names = self.row_names_ or tuple(
            f"row{i}" for i in range(self.mean_.shape[0])
        )
        return {
            name: {"mean": self.mean_[i], "std": self.std_[i]}
            for i, name in enumerate(names)
        }
