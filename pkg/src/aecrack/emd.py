"""Empirical mode decomposition by envelope sifting.

Decomposes a waveform into intrinsic mode functions (IMFs), highest local
frequency first, plus a residual. Envelopes are natural cubic splines through
the local extrema with boundary extrema mirrored across the signal ends.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import SignalTooShortError
from .spectral import TimeSeries

DEFAULT_MAX_IMFS = 12
DEFAULT_SIFT_TOLERANCE = 0.2
DEFAULT_SIFT_CAP = 100


@dataclass(frozen=True)
class IMFSet:
    """Ordered IMFs, the residual, and each IMF's correlation with the source."""

    imfs: tuple
    residual: TimeSeries
    significance: np.ndarray

    def __len__(self):
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        out = self.residual.samples.copy()
        for imf in self.imfs:
            out += imf.samples
        return out


def local_extrema(x: np.ndarray):
    """Indices of strict local maxima and minima."""
    interior = x[1:-1]
    up = (interior > x[:-2]) & (interior > x[2:])
    dn = (interior < x[:-2]) & (interior < x[2:])
    return np.nonzero(up)[0] + 1, np.nonzero(dn)[0] + 1


def zero_crossings(x: np.ndarray) -> int:
    return int(np.count_nonzero(np.diff(np.signbit(x))))


def is_imf_candidate(x: np.ndarray) -> bool:
    """Extrema count and zero-crossing count differ by at most one."""
    maxi, mini = local_extrema(x)
    return abs((maxi.size + mini.size) - zero_crossings(x)) <= 1


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; 0 when either input is constant."""
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)


def _mirrored(idx: np.ndarray, val: np.ndarray, n: int):
    """Reflect up to two extrema across each signal end for spline support."""
    left_i, left_v = [], []
    for k in range(min(2, idx.size)):
        if idx[k] > 0:
            left_i.append(-float(idx[k]))
            left_v.append(val[k])
    right_i, right_v = [], []
    for k in range(min(2, idx.size)):
        if idx[-1 - k] < n - 1:
            right_i.append(float(2 * (n - 1) - idx[-1 - k]))
            right_v.append(val[-1 - k])
    knots = np.concatenate([left_i[::-1], idx.astype(np.float64), right_i])
    values = np.concatenate([left_v[::-1], val, right_v])
    return knots, values


def _second_derivatives(knots: np.ndarray, values: np.ndarray, h: np.ndarray) -> np.ndarray:
    k = knots.shape[0]
    rhs = np.zeros(k)
    dv = np.diff(values) / h
    rhs[1:-1] = 6.0 * (dv[1:] - dv[:-1])
    ab = np.zeros((3, k))
    ab[0, 2:] = h[1:]
    ab[1, 0] = ab[1, -1] = 1.0
    ab[1, 1:-1] = 2.0 * (h[:-1] + h[1:])
    ab[2, :-2] = h[:-1]
    # natural BC: second derivative fixed to zero at both ends
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    return solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True,
                        check_finite=False)


def _piecewise_cubic(knots, values, h, m, j, grid):
    # per-segment Horner coefficients in the local variable b = x - knots[j]
    dv = np.diff(values) / h
    c0 = values[:-1]
    c1 = dv - h * (2.0 * m[:-1] + m[1:]) / 6.0
    c2 = m[:-1] / 2.0
    c3 = (m[1:] - m[:-1]) / (6.0 * h)
    b = grid - knots[j]
    return ((c3[j] * b + c2[j]) * b + c1[j]) * b + c0[j]


def natural_cubic_eval(knots: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Natural cubic spline through (knots, values) evaluated at grid points.

    Solves the tridiagonal system for the knot second derivatives with
    zero-curvature end conditions, then evaluates the piecewise cubic.
    """
    k = knots.shape[0]
    if k == 2:
        slope = (values[1] - values[0]) / (knots[1] - knots[0])
        return values[0] + slope * (grid - knots[0])
    h = np.diff(knots)
    m = _second_derivatives(knots, values, h)
    j = np.clip(np.searchsorted(knots, grid, side="right") - 1, 0, k - 2)
    return _piecewise_cubic(knots, values, h, m, j, grid)


def _segments_on_grid(knots: np.ndarray, n: int) -> np.ndarray:
    """Segment index per grid point 0..n-1 for strictly increasing integer knots."""
    marks = np.zeros(n, dtype=np.intp)
    inside = knots[(knots > 0) & (knots <= n - 1)].astype(np.intp)
    marks[inside] = 1
    j = np.cumsum(marks) + np.count_nonzero(knots <= 0) - 1
    return np.clip(j, 0, knots.shape[0] - 2, out=j)


def _spline_env(idx: np.ndarray, val: np.ndarray, n: int, grid: np.ndarray) -> np.ndarray:
    knots, values = _mirrored(idx, val, n)
    if knots.shape[0] == 2:
        slope = (values[1] - values[0]) / (knots[1] - knots[0])
        return values[0] + slope * (grid - knots[0])
    h = np.diff(knots)
    m = _second_derivatives(knots, values, h)
    return _piecewise_cubic(knots, values, h, m, _segments_on_grid(knots, n), grid)


def _mean_envelope(h: np.ndarray, maxi, mini, n: int, grid: np.ndarray) -> np.ndarray:
    return 0.5 * (
        _spline_env(maxi, h[maxi], n, grid) + _spline_env(mini, h[mini], n, grid)
    )


def _sift(residual: np.ndarray, tolerance: float, cap: int) -> np.ndarray | None:
    n = residual.shape[0]
    grid = np.arange(n, dtype=np.float64)
    h = residual
    maxi, mini = local_extrema(h)
    for _ in range(cap):
        if maxi.size < 2 or mini.size < 2:
            return None if h is residual else h
        mean_env = _mean_envelope(h, maxi, mini, n, grid)
        prev_energy = np.dot(h, h)
        if prev_energy == 0.0:
            return None
        sd = np.dot(mean_env, mean_env) / prev_energy
        h = h - mean_env
        maxi, mini = local_extrema(h)
        if sd < tolerance:
            diff = abs((maxi.size + mini.size) - zero_crossings(h))
            if diff <= 1:
                break
    return h


def emd_decompose(
    x: TimeSeries,
    max_imfs: int = DEFAULT_MAX_IMFS,
    sift_tolerance: float = DEFAULT_SIFT_TOLERANCE,
    sift_cap: int = DEFAULT_SIFT_CAP,
) -> IMFSet:
    """Extract IMFs until the residual is monotone or max_imfs is reached.

    Sifting of each mode stops when the Cauchy criterion
    sum((h_prev - h_new)^2) / sum(h_prev^2) drops below sift_tolerance and the
    mode satisfies the extrema/zero-crossing condition, or at the sift cap.
    """
    if len(x) < 16:
        raise SignalTooShortError(f"EMD needs >= 16 samples, got {len(x)}")
    source = x.samples.astype(np.float64)
    residual = source.copy()
    imfs = []
    while len(imfs) < max_imfs:
        maxi, mini = local_extrema(residual)
        if maxi.size < 2 or mini.size < 2:
            break
        imf = _sift(residual, sift_tolerance, sift_cap)
        if imf is None:
            break
        imfs.append(imf)
        residual = residual - imf
    significance = np.array([pearson(imf, source) for imf in imfs])
    return IMFSet(
        imfs=tuple(TimeSeries(imf, x.sample_rate) for imf in imfs),
        residual=TimeSeries(residual, x.sample_rate),
        significance=significance,
    )
