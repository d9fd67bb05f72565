"""Coincidence analysis of tag streams.

Delays are found as the maximum of the herald/detector coincidence
histogram, refined to sub-bin precision with a three-point parabola. The
shift of that maximum between the baseline and grating runs is compared
against the collapse-delay prediction.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy import special, stats

from .simkit.specs import TagStream


class AnalysisError(ValueError):
    pass


class InsignificantPeakError(AnalysisError):
    pass


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    bin_width: int  # ps
    tau_min: int  # ps
    tau_max: int  # ps
    counts: np.ndarray
    total_pairs: int

    @property
    def range(self) -> tuple[int, int]:
        return (self.tau_min, self.tau_max)

    @property
    def edges(self) -> np.ndarray:
        return self.tau_min + self.bin_width * np.arange(self.counts.size + 1, dtype=np.int64)

    @property
    def centers(self) -> np.ndarray:
        return self.tau_min + self.bin_width * (np.arange(self.counts.size) + 0.5)

    def __eq__(self, other):
        if not isinstance(other, CoincidenceHistogram):
            return NotImplemented
        return (
            self.bin_width == other.bin_width
            and self.range == other.range
            and np.array_equal(self.counts, other.counts)
        )

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if self.bin_width != other.bin_width or self.range != other.range:
            raise AnalysisError("cannot add histograms with different binning")
        return CoincidenceHistogram(
            self.bin_width, self.tau_min, self.tau_max, self.counts + other.counts, self.total_pairs + other.total_pairs
        )

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("tau_ps,counts\n")
            for c, n in zip(self.centers.tolist(), self.counts.tolist()):
                fh.write(f"{_fmt_ps(c)},{n}\n")


def _fmt_ps(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@njit(cache=True)
def _sweep(ref, sig, tmin, tmax, bw, counts):
    # two-pointer sweep; lo only moves forward because ref is sorted
    m = sig.size
    lo = 0
    pairs = 0
    for i in range(ref.size):
        t = ref[i]
        while lo < m and sig[lo] < t + tmin:
            lo += 1
        j = lo
        while j < m and sig[j] < t + tmax:
            counts[(sig[j] - t - tmin) // bw] += 1
            pairs += 1
            j += 1
    return pairs


def correlate(ref, sig, bin_width: int = 2000, range_ps: tuple[int, int] = (-51000, 51000)) -> CoincidenceHistogram:
    """Histogram of ``t_sig - t_ref`` over all pairs inside ``[tau_min, tau_max)``.

    ``ref`` and ``sig`` are sorted integer picosecond arrays (one channel each).
    Bin ``k`` covers ``[tau_min + k*bin_width, tau_min + (k+1)*bin_width)``.
    """
    ref = np.ascontiguousarray(ref, dtype=np.int64)
    sig = np.ascontiguousarray(sig, dtype=np.int64)
    if ref.size == 0 or sig.size == 0:
        raise AnalysisError("correlate needs two non-empty channels")
    bw = int(bin_width)
    tmin, tmax = int(range_ps[0]), int(range_ps[1])
    if bw <= 0 or tmax <= tmin or (tmax - tmin) % bw:
        raise AnalysisError(f"range {range_ps} must be a positive multiple of bin width {bw}")
    if np.any(np.diff(ref) < 0) or np.any(np.diff(sig) < 0):
        raise AnalysisError("streams must be sorted")
    counts = np.zeros((tmax - tmin) // bw, dtype=np.int64)
    pairs = _sweep(ref, sig, tmin, tmax, bw, counts)
    return CoincidenceHistogram(bw, tmin, tmax, counts, int(pairs))


def correlate_channels(stream: TagStream, ref_ch: int, sig_ch: int, bin_width=2000, range_ps=(-51000, 51000)):
    return correlate(stream.channel(ref_ch), stream.channel(sig_ch), bin_width, range_ps)


@dataclass(frozen=True)
class DelayEstimate:
    tau_star: float  # ps
    peak_counts: int
    background_level: float
    significance_sigma: float
    sub_bin_refined: bool
    peak_found: bool
    uncertainty: float  # ps, 1 sigma
    peak_sigma: float  # ps, fitted Gaussian width of the peak (nan if unknown)
    bin_width: int

    @property
    def tau_ns(self) -> float:
        return self.tau_star / 1000.0


def parabolic_vertex(ym1: float, y0: float, yp1: float) -> float:
    """Vertex offset, in bins, of the parabola through three equally spaced points."""
    den = ym1 - 2.0 * y0 + yp1
    if den == 0:
        return 0.0
    return 0.5 * (ym1 - yp1) / den


def interpolation_bias_bound(peak_sigma_bins: float, phases: int = 101) -> float:
    """Worst-case error, in bins, of the three-point vertex on a binned Gaussian peak."""
    if not math.isfinite(peak_sigma_bins) or peak_sigma_bins <= 0:
        return 0.5
    worst = 0.0
    e = np.arange(-8, 9) - 0.5
    for ph in np.linspace(-0.5, 0.5, phases):
        cdf = special.ndtr((e - ph) / peak_sigma_bins)
        y = np.diff(cdf)
        k = int(np.argmax(y))
        if k == 0 or k == y.size - 1:
            return 0.5
        est = (k - 8) + parabolic_vertex(y[k - 1], y[k], y[k + 1])
        worst = max(worst, abs(est - ph))
    return min(worst, 0.5)


def _peak_sigma(ym1, y0, yp1, bg, bw):
    """Gaussian width from the log-curvature of the background-subtracted top three bins."""
    a, b, c = ym1 - bg, y0 - bg, yp1 - bg
    if min(a, b, c) <= 0:
        return math.nan
    curv = 2.0 * math.log(b) - math.log(a) - math.log(c)
    if curv <= 0:
        return math.nan
    return bw / math.sqrt(curv)


def estimate_delay(hist: CoincidenceHistogram, min_significance: float = 5.0) -> DelayEstimate:
    """Locate the coincidence maximum.

    Ties between equal maximal bins go to the bin nearest zero delay (then
    to the earlier bin). Refinement uses the maximal bin and both
    neighbours, and only when both neighbours sit above the median
    background.
    """
    y = np.asarray(hist.counts)
    if y.size < 3:
        raise AnalysisError("need at least 3 bins")
    if not np.any(y):
        raise AnalysisError("histogram is empty")
    bw = hist.bin_width
    centers = hist.centers
    top = y.max()
    cand = np.flatnonzero(y == top)
    k = int(cand[np.lexsort((centers[cand], np.abs(centers[cand])))[0]])
    bg = float(np.median(y))
    sig = (float(top) - bg) / math.sqrt(max(bg, 1.0))
    sig = max(sig, 0.0)
    tau = float(centers[k])
    refined = False
    peak_sigma = math.nan
    if 0 < k < y.size - 1 and y[k - 1] > bg and y[k + 1] > bg:
        ym1, y0, yp1 = float(y[k - 1]), float(y[k]), float(y[k + 1])
        tau += parabolic_vertex(ym1, y0, yp1) * bw
        refined = True
        peak_sigma = _peak_sigma(ym1, y0, yp1, bg, bw)
    # statistical part: centroid error of the background-subtracted peak
    lo, hi = max(k - 3, 0), min(k + 4, y.size)
    n_sig = float(np.clip(y[lo:hi] - bg, 0, None).sum())
    width = peak_sigma if math.isfinite(peak_sigma) else bw / math.sqrt(12.0)
    stat = width / math.sqrt(n_sig) if n_sig > 0 else bw
    if refined:
        sys = interpolation_bias_bound(peak_sigma / bw if math.isfinite(peak_sigma) else math.nan) * bw
    else:
        sys = bw / math.sqrt(12.0)
    return DelayEstimate(
        tau_star=tau,
        peak_counts=int(top),
        background_level=bg,
        significance_sigma=sig,
        sub_bin_refined=refined,
        peak_found=sig >= min_significance,
        uncertainty=math.hypot(stat, sys),
        peak_sigma=peak_sigma,
        bin_width=bw,
    )


HK = "HK-consistent"
QM = "QM-consistent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DeltaTVerdict:
    delta_t: float  # ps
    sigma: float  # ps
    predicted_t_delay: float  # ps
    verdict: str
    hk_lower_bound: float  # ps; HK-consistent when delta_t >= this
    qm_band: float  # ps; QM-consistent when |delta_t| <= this
    min_significance: float
    k_sigma: float
    hk_consistent: bool
    qm_consistent: bool
    separation_sigma: float
    t0: float
    t1: float

    def to_dict(self) -> dict:
        return asdict(self)


def delta_t_test(
    baseline: DelayEstimate,
    grating: DelayEstimate,
    predicted_t_delay: float,
    min_significance: float = 5.0,
    k_sigma: float = 2.0,
) -> DeltaTVerdict:
    """Compare the delay shift ``T1 - T0`` with the collapse prediction (all in ps).

    A shift at or above the prediction (within ``k_sigma``) supports
    delayed collapse; a shift compatible with zero supports instantaneous
    collapse. Outcomes satisfying both, or neither, are inconclusive.
    """
    for label, est in (("baseline", baseline), ("grating", grating)):
        if est.significance_sigma < min_significance:
            raise InsignificantPeakError(
                f"{label} peak significance {est.significance_sigma:.2f} < {min_significance}"
            )
    dt = grating.tau_star - baseline.tau_star
    s = math.hypot(baseline.uncertainty, grating.uncertainty)
    hk_lower = predicted_t_delay - k_sigma * s
    qm_band = k_sigma * s
    hk = dt >= hk_lower
    qm = abs(dt) <= qm_band
    if hk and not qm:
        verdict = HK
    elif qm and not hk:
        verdict = QM
    else:
        verdict = INCONCLUSIVE
    return DeltaTVerdict(
        delta_t=dt,
        sigma=s,
        predicted_t_delay=predicted_t_delay,
        verdict=verdict,
        hk_lower_bound=hk_lower,
        qm_band=qm_band,
        min_significance=min_significance,
        k_sigma=k_sigma,
        hk_consistent=hk,
        qm_consistent=qm,
        separation_sigma=abs(predicted_t_delay) / s if s > 0 else math.inf,
        t0=baseline.tau_star,
        t1=grating.tau_star,
    )


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    n_heralds: int
    n_a: int
    n_b: int
    n_ab: int
    window: int  # ps
    alpha_sigma: float
    alpha_upper95: float

    @property
    def counts(self) -> dict:
        return {"N_heralds": self.n_heralds, "N_A": self.n_a, "N_B": self.n_b, "N_AB": self.n_ab}


def _hits(heralds, tags, offset, window):
    lo = np.searchsorted(tags, heralds + offset - window // 2, side="left")
    hi = np.searchsorted(tags, heralds + offset + (window - window // 2), side="right")
    return hi > lo


def anticorrelation_alpha(heralds, a, b, window: int, offset_a: int = 0, offset_b: int = 0) -> AlphaResult:
    """Heralded anticorrelation parameter ``N_AB * N_h / (N_A * N_B)``.

    A herald counts for detector A when A has at least one tag within
    ``window/2`` of ``herald + offset_a``; likewise for B.
    """
    heralds = np.asarray(heralds, dtype=np.int64)
    if heralds.size == 0:
        raise AnalysisError("no heralds")
    if window <= 0:
        raise AnalysisError("window must be positive")
    ha = _hits(heralds, np.asarray(a, dtype=np.int64), int(offset_a), int(window))
    hb = _hits(heralds, np.asarray(b, dtype=np.int64), int(offset_b), int(window))
    nh, na, nb, nab = heralds.size, int(ha.sum()), int(hb.sum()), int((ha & hb).sum())
    if na * nb > 0:
        scale = nh / (na * nb)
        alpha = nab * scale
        sigma = math.sqrt(max(nab, 1)) * scale
        upper = 0.5 * stats.chi2.ppf(0.95, 2 * (nab + 1)) * scale
    else:
        alpha = sigma = upper = math.nan
    return AlphaResult(alpha, nh, na, nb, nab, int(window), sigma, upper)


def report_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")
