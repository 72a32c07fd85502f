"""Long-time echo statistics and the spectral function of the quench.

Frequency convention (used by both spectral forms): a quenched level
``E'_n`` produces a line at ``omega = E'_n - E0``, so a repulsive impurity
puts every line at ``omega > 0`` and impurity bound states show up at
``omega < 0``. ``omega + E0`` is the absolute quenched energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quench_dynamics import DEFAULT_HORIZON, EchoSeries, QuenchResult, horizon_warning

CATEGORIES = ("double_peaked", "gaussian", "exponential", "winged", "mixed")


@dataclass(frozen=True)
class EchoHistogram:
    bin_edges: np.ndarray
    probabilities: np.ndarray
    sample_count: int
    horizon: float
    short_horizon: bool = False

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def density(self) -> np.ndarray:
        """Probabilities divided by bin width (integrates to one)."""
        return self.probabilities / np.diff(self.bin_edges)


def le_histogram(series: EchoSeries, bins: int = 100, lower: str = "zero",
                 min_horizon: float = DEFAULT_HORIZON) -> EchoHistogram:
    """Normalized histogram of the sampled echo.

    The bins span ``[0, max echo]`` (``lower="zero"``) or only the sampled
    range ``[min echo, max echo]`` (``lower="min"``), which resolves the shape
    of weak-quench distributions crowded near one.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if lower not in ("zero", "min"):
        raise ValueError(f"lower must be 'zero' or 'min', got {lower!r}")
    y = series.echo
    top = float(y.max())
    bottom = float(y.min()) if lower == "min" else 0.0
    if top <= bottom:
        # constant echo: all mass lands in the top bin
        bottom = 0.0 if top > 0 else top - 1.0
    counts, edges = np.histogram(y, bins=bins, range=(bottom, top))
    p = counts / counts.sum()
    return EchoHistogram(edges, p, int(y.size), series.horizon,
                         horizon_warning(series, min_horizon))


DEGENERACY_TOL = 1e-9


def merge_degenerate(energies: np.ndarray, weights: np.ndarray,
                     tol: float = DEGENERACY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Combine lines whose energies differ by at most ``tol`` (ascending input).

    Inside a degenerate block the eigenbasis is arbitrary and so are the
    individual ``|a_n|^2``; only the block sums are physical. Each merged line
    sits at the weight-averaged energy of its block.
    """
    energies = np.asarray(energies, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if energies.size == 0:
        return energies, weights
    if np.any(np.diff(energies) < 0):
        raise ValueError("energies must be ascending")
    starts = np.r_[0, np.flatnonzero(np.diff(energies) > tol) + 1]
    block = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, energies.size]))
    first = energies[starts]
    total = np.bincount(block, weights)
    # weighted mean of each block; zero-weight blocks keep their first energy
    moment = np.bincount(block, weights * (energies - first[block]))
    shift = np.divide(moment, total, out=np.zeros_like(total), where=total > 0)
    return first + shift, total


def mean_le(result: QuenchResult, degeneracy_tol: float = DEGENERACY_TOL) -> float:
    """Infinite-time average of the echo, ``sum |a_n|^4``.

    Degenerate levels (within ``degeneracy_tol``) are merged first, which
    makes the value independent of the basis chosen inside a degenerate
    block; for a non-degenerate spectrum it is the plain sum.
    """
    _, w = merge_degenerate(result.final_energies, result.weights, degeneracy_tol)
    return float(np.sum(w ** 2))


@dataclass(frozen=True)
class SpectralFunction:
    """Line spectrum and/or sampled curve of ``A(omega)``.

    ``peak_weights`` are ``2 pi |a_n|^2``. ``curve`` is ``(omega, A)``.
    """

    reference_frequency: float
    peak_frequencies: np.ndarray | None = None
    peak_weights: np.ndarray | None = None
    curve: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    resolution: float | None = None
    underresolved: bool = False

    def significant(self, rel: float = 1e-4) -> np.ndarray:
        """Mask of peaks heavier than ``rel`` times the heaviest."""
        w = self.peak_weights
        return w > rel * w.max()


def spectral_function_discrete(result: QuenchResult,
                               degeneracy_tol: float = DEGENERACY_TOL) -> SpectralFunction:
    """Line spectrum ``A(omega) = 2 pi sum_n |a_n|^2 delta(omega - (E'_n - E0))``.

    Degenerate lines are merged (see :func:`merge_degenerate`), so the line
    list does not depend on the eigenbasis inside degenerate blocks.
    """
    e, w = merge_degenerate(result.final_energies, result.weights, degeneracy_tol)
    return SpectralFunction(result.initial_energy, e - result.initial_energy, 2 * math.pi * w)


def spectral_function_fft(series: EchoSeries, window: str | None = None,
                          pad: int = 2, min_gap: float | None = None) -> SpectralFunction:
    """``A(omega) = 2 pi Re int exp(i omega t) nu(t) dt`` over ``[-T, T]``.

    The negative-time half is ``conj(nu(t))``, so the integral equals twice
    the real part of the one-sided transform, evaluated by trapezoid
    quadrature through an FFT zero-padded ``pad`` times.

    Parameters
    ----------
    window : {None, "hann"}
        Optional taper over ``[-T, T]``.
    min_gap : float, optional
        Smallest line separation the curve must resolve; if the frequency
        resolution ``2 pi / T`` is coarser, ``underresolved`` is set.
    """
    t = series.times
    nu = series.amplitude.copy()
    if t.size < 2:
        raise ValueError("need at least two samples")
    dt = series.dt
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("spectral_function_fft needs a uniform time grid")
    if t[0] != 0:
        raise ValueError("time grid must start at t = 0")
    horizon = t[-1]
    if window == "hann":
        nu = nu * np.cos(0.5 * math.pi * t / horizon) ** 2
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    # trapezoid end corrections
    nu[0] *= 0.5
    nu[-1] *= 0.5
    m = t.size * pad
    one_sided = np.fft.ifft(nu, n=m) * m * dt  # sum_k nu_k exp(+i w t_k) dt
    omega = 2 * math.pi * np.fft.fftfreq(m, dt)
    order = np.argsort(omega, kind="stable")
    amp = 2 * math.pi * 2 * one_sided.real
    resolution = 2 * math.pi / horizon
    under = min_gap is not None and min_gap < resolution
    return SpectralFunction(0.0, curve=(omega[order], amp[order]),
                            resolution=resolution, underresolved=bool(under))


def curve_peaks(curve: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Frequencies of the strict local maxima of a sampled curve."""
    w, a = curve
    interior = (a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:])
    return w[1:-1][interior]


def min_line_gap(spec: SpectralFunction, rel: float = 1e-4) -> float:
    w = np.sort(spec.peak_frequencies[spec.significant(rel)])
    if w.size < 2:
        return math.inf
    return float(np.min(np.diff(w)))


@dataclass(frozen=True)
class TailFit:
    fit_range: tuple[float, float]
    n_points: int
    power_law: tuple[float, float]  # (exponent, R^2)
    exponential: tuple[float, float]  # (rate, R^2)
    verdict: str


def _r_squared(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(min(max(r2, 0.0), 1.0))


def fit_spectral_tail(spec: SpectralFunction, window: tuple[float, float],
                      bin_width: float | None = None) -> TailFit:
    """Compare power-law and exponential fits to the spectral tail.

    Fits ``log w`` against ``log omega`` and against ``omega`` for the lines
    with ``window[0] <= omega <= window[1]`` and positive weight. Goodness is
    the coefficient of determination of each straight-line fit.

    Parameters
    ----------
    spec : SpectralFunction
        Line spectrum (``peak_frequencies``, ``peak_weights``).
    window : (float, float)
        Frequency range of the tail, ``0 < lo < hi``.
    bin_width : float, optional
        If given, weights are first summed into consecutive bins of this width
        starting at ``lo`` and each non-empty bin is placed at its
        weight-averaged frequency. Individual lines of a dense two-body
        spectrum scatter by orders of magnitude; the binned weight is the
        spectral density whose decay the fit is meant to capture.
    """
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"window must satisfy 0 < lo < hi, got {window}")
    w = spec.peak_frequencies
    a = spec.peak_weights
    sel = (w >= lo) & (w <= hi) & (a > 0)
    x, wt = w[sel], a[sel]
    if bin_width is not None:
        if not bin_width > 0:
            raise ValueError(f"bin_width must be positive, got {bin_width}")
        idx = np.floor((x - lo) / bin_width).astype(int)
        total = np.bincount(idx, weights=wt)
        moment = np.bincount(idx, weights=wt * x)
        keep = total > 0
        x, wt = moment[keep] / total[keep], total[keep]
    if x.size < 5:
        raise ValueError(f"only {x.size} points in tail window {window}; need >= 5")
    y = np.log(wt)
    p_slope, p_r2 = _r_squared(np.log(x), y)
    e_slope, e_r2 = _r_squared(x, y)
    verdict = "power_law" if p_r2 > e_r2 else "exponential"
    return TailFit((lo, hi), int(x.size), (p_slope, p_r2), (-e_slope, e_r2), verdict)


@dataclass(frozen=True)
class ClassifierThresholds:
    """Tunable cut-offs of :func:`classify_distribution`.

    Positions are fractions of the occupied support of the histogram.
    """

    smoothing_bins: float = 2.0
    peak_prominence: float = 0.1
    exponential_mode_position: float = 0.1
    exponential_decreasing_fraction: float = 0.7
    double_peak_outer: float = 0.4
    double_peak_dip: float = 0.9
    winged_center: tuple[float, float] = (0.35, 0.65)
    winged_max_skew: float = 0.2
    winged_min_inflections: int = 4
    inflection_tolerance: float = 0.05
    gaussian_max_skew: float = 0.5


@dataclass(frozen=True)
class Classification:
    label: str
    confidence: float
    features: dict
    thresholds: ClassifierThresholds


def _histogram_features(hist: EchoHistogram, th: ClassifierThresholds) -> dict:
    from scipy.ndimage import gaussian_filter1d
    from scipy.signal import find_peaks

    p = np.asarray(hist.probabilities, dtype=float)
    x = hist.centers
    occupied = np.flatnonzero(p > 0)
    lo, hi = occupied[0], occupied[-1] + 1
    p, x = p[lo:hi], x[lo:hi]
    n = p.size
    mean = float(np.sum(p * x))
    var = float(np.sum(p * (x - mean) ** 2))
    sd = math.sqrt(var) if var > 0 else 0.0
    skew = float(np.sum(p * (x - mean) ** 3) / sd ** 3) if sd > 0 else 0.0
    kurt = float(np.sum(p * (x - mean) ** 4) / sd ** 4 - 3) if sd > 0 else 0.0

    smooth = gaussian_filter1d(p, th.smoothing_bins, mode="constant") if n > 1 else p
    padded = np.r_[0.0, smooth, 0.0]
    peaks, props = find_peaks(padded, prominence=th.peak_prominence * smooth.max())
    peaks = peaks - 1
    order = np.argsort(-smooth[peaks], kind="stable")
    peaks = peaks[order]
    pos = (peaks + 0.5) / n if n else peaks

    mode = int(np.argmax(smooth))
    tail = np.diff(smooth[mode:])
    tail = tail[np.abs(tail) > 1e-3 * smooth.max()]
    decreasing = float(np.mean(tail <= 0)) if tail.size else 1.0

    d2 = np.diff(smooth, 2)
    sig = d2[np.abs(d2) > th.inflection_tolerance * np.abs(d2).max()] if d2.size else d2
    inflections = int(np.sum(np.sign(sig[1:]) != np.sign(sig[:-1]))) if sig.size > 1 else 0

    dip = None
    if peaks.size >= 2:
        a, b = sorted(peaks[:2])
        dip = float(smooth[a:b + 1].min() / min(smooth[a], smooth[b]))
    return dict(n_bins=n, mean=mean, std=sd, skewness=skew, excess_kurtosis=kurt,
                peak_positions=[float(v) for v in pos], mode_position=(mode + 0.5) / n,
                decreasing_fraction=decreasing, inflections=inflections, dip_ratio=dip)


def classify_distribution(hist: EchoHistogram,
                          thresholds: ClassifierThresholds | None = None) -> Classification:
    """Heuristic shape label for an echo histogram.

    Rules are tried in order (features measured on the occupied bins after
    Gaussian smoothing):

    ``exponential``
        mode at the low edge and the mass decays from there;
    ``double_peaked``
        two prominent maxima in opposite outer parts of the support with a dip
        between them;
    ``winged``
        one central maximum whose flanks carry shoulders, detected as extra
        changes of curvature;
    ``gaussian``
        one interior maximum and small skewness;
    ``mixed``
        anything else.

    Works best on a histogram spanning only the sampled range
    (``le_histogram(..., lower="min")``).
    """
    th = thresholds or ClassifierThresholds()
    f = _histogram_features(hist, th)
    pos = f["peak_positions"]
    n_peaks = len(pos)

    def done(label, confidence):
        return Classification(label, float(min(max(confidence, 0.0), 1.0)), f, th)

    if f["n_bins"] < 3:
        return done("mixed", 0.0)
    if (f["mode_position"] <= th.exponential_mode_position
            and f["decreasing_fraction"] >= th.exponential_decreasing_fraction
            and f["skewness"] > 0):
        return done("exponential", f["decreasing_fraction"])
    if n_peaks >= 2:
        a, b = sorted(pos[:2])
        if (a < th.double_peak_outer and b > 1 - th.double_peak_outer
                and f["dip_ratio"] < th.double_peak_dip):
            return done("double_peaked", 1 - f["dip_ratio"])
    if n_peaks == 1:
        lo, hi = th.winged_center
        central = lo <= pos[0] <= hi
        if (central and f["inflections"] >= th.winged_min_inflections
                and abs(f["skewness"]) < th.winged_max_skew):
            return done("winged", 1 - abs(pos[0] - 0.5) / 0.5)
        if pos[0] > th.exponential_mode_position and abs(f["skewness"]) < th.gaussian_max_skew:
            return done("gaussian", 1 - abs(f["skewness"]) / th.gaussian_max_skew)
    return done("mixed", 0.5)
