"""Analysis of simulated or measured detector data.

Serial autocorrelation of bit streams, histograms of the interval between
adjacent pulses of one detector, subtraction of the Poissonian photon
background from such histograms, an exponential afterpulse fit, and the RMS
distance between two autocorrelation-versus-rate curves.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize


class FitError(RuntimeError):
    """Raised when the afterpulse fit has nothing usable to work with."""


@dataclass(frozen=True)
class AutocorrResult:
    lag: int
    coefficient: float
    std_error: float
    n_bits: int


def _bit_array(bits) -> np.ndarray:
    return np.asarray(getattr(bits, "bits", bits))


def serial_autocorrelation(bits, lag: int = 1) -> AutocorrResult:
    r"""Lag-``k`` serial autocorrelation with the pooled sample mean.

    .. math::

        a_k = \frac{\sum_{i=1}^{N-k} (b_i - \bar b)(b_{i+k} - \bar b)}
                   {\sum_{i=1}^{N} (b_i - \bar b)^2}

    The standard error is taken as ``1 / sqrt(N - k)``. 0/1 input is
    evaluated from exact integer counts; other numeric input in floating point.
    """
    b = _bit_array(bits)
    n = b.size
    if lag < 1:
        raise ValueError(f"lag must be a positive integer, got {lag}")
    if n < lag + 2:
        raise ValueError(f"need at least {lag + 2} bits for lag {lag}, got {n}")

    if b.dtype == np.bool_ or (np.issubdtype(b.dtype, np.integer) and b.min() >= 0 and b.max() <= 1):
        b = b.astype(np.uint8, copy=False)
        n1 = int(np.count_nonzero(b))
        if n1 == 0 or n1 == n:
            raise ValueError("autocorrelation undefined for a constant sequence")
        head = int(np.count_nonzero(b[:n - lag]))
        tail = int(np.count_nonzero(b[lag:]))
        both = int(np.count_nonzero(b[:n - lag] & b[lag:]))
        m = n1 / n
        num = both - m * (head + tail) + (n - lag) * m * m
        den = n1 * (n - n1) / n
    else:
        x = b.astype(np.float64)
        d = x - x.mean()
        den = float(np.dot(d, d))
        if den == 0:
            raise ValueError("autocorrelation undefined for a constant sequence")
        num = float(np.dot(d[:n - lag], d[lag:]))
    return AutocorrResult(lag, num / den, 1.0 / math.sqrt(n - lag), n)


def rms_error(sim, meas) -> float:
    """Root-mean-square difference between paired simulated and measured values."""
    s = np.asarray(sim, dtype=float)
    m = np.asarray(meas, dtype=float)
    if s.shape != m.shape or s.ndim != 1:
        raise ValueError(f"columns must be 1-d and equal length, got {s.shape} and {m.shape}")
    if s.size == 0:
        raise ValueError("need at least one point")
    return float(np.sqrt(np.mean((s - m) ** 2)))


@dataclass(frozen=True, eq=False)
class IntervalHistogram:
    """Counts of adjacent-pulse intervals in bins ``[t_min + k w, t_min + (k+1) w)``.

    ``background`` is filled in by :func:`subtract_background`.
    """

    bin_width_ns: float
    t_min_ns: float
    counts: np.ndarray
    total_intervals: int
    background: np.ndarray | None = None

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def bin_starts(self) -> np.ndarray:
        return self.t_min_ns + self.bin_width_ns * np.arange(self.n_bins)

    @property
    def bin_centers(self) -> np.ndarray:
        return self.bin_starts + 0.5 * self.bin_width_ns

    @property
    def residual(self) -> np.ndarray:
        """Raw counts minus background; may be negative."""
        if self.background is None:
            return self.counts.astype(float)
        return self.counts - self.background

    @property
    def residual_clamped(self) -> np.ndarray:
        return np.clip(self.residual, 0.0, None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start_ns", "count", "background", "residual"])
        bg = self.background if self.background is not None else np.zeros(self.n_bins)
        for t, c, b, r in zip(self.bin_starts, self.counts, bg, self.residual_clamped):
            w.writerow([f"{t:.6g}", int(c), f"{b:.6g}", f"{r:.6g}"])
        return buf.getvalue()


def interarrival_histogram(train, bin_width_ns: float, t_max_ns: float,
                           t_min_ns: float = 0.0) -> IntervalHistogram:
    """Histogram the gaps between consecutive timestamps of one detector.

    Gaps outside ``[t_min_ns, t_max_ns)`` are counted in ``total_intervals``
    but not binned.
    """
    ts = np.asarray(getattr(train, "timestamps", train), dtype=float)
    if ts.size < 2:
        raise ValueError("need at least two pulses")
    if not bin_width_ns > 0:
        raise ValueError(f"bin width must be positive, got {bin_width_ns}")
    if not t_max_ns > t_min_ns:
        raise ValueError("t_max_ns must exceed t_min_ns")
    n_bins = int(math.ceil((t_max_ns - t_min_ns) / bin_width_ns - 1e-9))
    gaps = np.diff(ts)
    idx = np.floor((gaps - t_min_ns) / bin_width_ns)
    idx = idx[(idx >= 0) & (idx < n_bins)].astype(np.int64)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return IntervalHistogram(float(bin_width_ns), float(t_min_ns), counts, int(gaps.size))


def subtract_background(hist: IntervalHistogram, photon_rate_hz: float,
                        tail_start_ns: float | None = None,
                        min_tail_bins: int = 20) -> IntervalHistogram:
    """Remove the real-photon contribution ``B exp(-t / s)``, ``s = 1 / rate``.

    ``B`` is fitted by least squares over the tail, by default the upper half
    of the histogram range, where afterpulses have died out.
    """
    if not photon_rate_hz > 0:
        raise ValueError(f"photon rate must be positive, got {photon_rate_hz}")
    t = hist.bin_centers
    if tail_start_ns is None:
        tail_start_ns = hist.t_min_ns + 0.5 * hist.n_bins * hist.bin_width_ns
    tail = hist.bin_starts >= tail_start_ns
    if tail.sum() < min_tail_bins:
        raise ValueError(f"background tail has {int(tail.sum())} bins, need {min_tail_bins}")
    shape = np.exp(-(t - hist.t_min_ns) * photon_rate_hz * 1e-9)
    g = shape[tail]
    amp = float(np.dot(hist.counts[tail], g) / np.dot(g, g))
    return replace(hist, background=amp * shape)


@dataclass(frozen=True)
class AfterpulseFit:
    tau_ns: float
    tau_err_ns: float
    amplitude: float
    afterpulse_prob: float
    visible_fraction: float
    fit_window: tuple[float, float]
    n_bins: int
    reduced_chi2: float

    def summary(self) -> dict:
        return {
            "tau_ns": self.tau_ns,
            "tau_err_ns": self.tau_err_ns,
            "afterpulse_prob": self.afterpulse_prob,
            "visible_fraction": self.visible_fraction,
            "amplitude": self.amplitude,
            "fit_start_ns": self.fit_window[0],
            "fit_stop_ns": self.fit_window[1],
            "n_bins": self.n_bins,
            "reduced_chi2": self.reduced_chi2,
        }


def fit_afterpulse(hist: IntervalHistogram, dead_ns: float,
                   fit_window: tuple[float, float] | None = None,
                   tau_guess_ns: float = 40.0, min_bins: int = 10,
                   refine: bool = True) -> AfterpulseFit:
    """Fit ``A exp(-t / tau)`` to background-subtracted counts.

    A straight line through ``ln(residual)`` against bin centre, fitted over
    the positive bins with inverse-variance weights, gives the first
    estimate. With ``refine`` (the default) it seeds a weighted least-squares
    fit of the exponential itself over every bin in the window. That fit
    keeps the zero and negative residuals the log fit has to drop, which
    would otherwise bias ``tau`` upwards where the background dominates.
    The start of the default window sits 5 ns past the dead time, which
    keeps twilight pulses out of the fit.

    ``afterpulse_prob`` is the fitted exponential integrated from t = 0 per
    recorded interval, i.e. the trap-release probability before dead-time
    absorption. ``visible_fraction`` is the part that survives the dead time.
    """
    if fit_window is None:
        fit_window = (dead_ns + 5.0, dead_ns + 5.0 * tau_guess_ns)
    lo, hi = fit_window
    t = hist.bin_centers
    r = hist.residual
    in_window = (t >= lo) & (t <= hi)
    sel = in_window & (r > 0)
    n = int(sel.sum())
    if n < min_bins:
        raise FitError(f"only {n} positive bins in fit window [{lo}, {hi}] ns")
    x, y = t[sel], r[sel]
    # Poisson noise of the raw counts gives var(ln r) ~ raw / r**2; without a
    # background this is the plain count weight r
    raw = np.maximum(hist.counts[sel], y)
    weight = y * y / raw
    (slope, icept), cov = np.polyfit(x, np.log(y), 1, w=np.sqrt(weight), cov="unscaled")
    if not slope < 0:
        raise FitError(f"afterpulse residual does not decay (slope {slope:.3g} per ns)")
    resid = np.log(y) - (slope * x + icept)
    chi2 = float(np.sum(weight * resid ** 2) / max(n - 2, 1))
    tau = -1.0 / slope
    tau_err = math.sqrt(cov[0, 0] * max(chi2, 1.0)) / slope ** 2
    amp = math.exp(icept)

    if refine:
        x, y = t[in_window], r[in_window]
        bg = np.zeros_like(x) if hist.background is None else hist.background[in_window]
        x0 = 0.5 * (lo + hi)

        def model(tt, a, k):
            return a * np.exp(-k * (tt - x0))

        a_mid, k = amp * math.exp(-x0 / tau), 1.0 / tau
        # variances from expected rather than observed counts avoid the
        # downward bias of weighting each bin by its own fluctuation
        for _ in range(2):
            sigma = np.sqrt(np.maximum(bg + model(x, a_mid, k), 1.0))
            try:
                (a_mid, k), pcov = optimize.curve_fit(model, x, y, p0=(a_mid, k), sigma=sigma,
                                                      absolute_sigma=True)
            except (RuntimeError, optimize.OptimizeWarning) as exc:
                raise FitError(f"afterpulse refinement failed: {exc}") from exc
            if not (k > 0 and a_mid > 0):
                raise FitError("refined afterpulse fit does not decay")
        n = int(in_window.sum())
        chi2 = float(np.sum(((y - model(x, a_mid, k)) / sigma) ** 2) / max(n - 2, 1))
        tau = 1.0 / k
        tau_err = math.sqrt(pcov[1, 1] * max(chi2, 1.0)) / k ** 2
        amp = a_mid * math.exp(k * x0)

    # a bin centred on c holds N P_a exp(-c / tau) 2 sinh(w / 2 tau) counts
    per_bin = 2.0 * math.sinh(hist.bin_width_ns / (2.0 * tau))
    p_a = amp / (hist.total_intervals * per_bin)
    return AfterpulseFit(tau, tau_err, amp, p_a, p_a * math.exp(-dead_ns / tau),
                         (float(lo), float(hi)), n, chi2)
