"""Count-rate feasibility: single aperture vs grating, against dark noise."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

from . import constants


@dataclass(frozen=True)
class RateBudget:
    scenario: str
    source_rate: float
    path_efficiency: float
    geometric_acceptance: float
    detector_efficiency: float
    expected_rate: float
    dark_rate: float
    snr: float
    quoted_rate: float | None = None
    note: str = ""

    @property
    def below_dark_noise(self) -> bool:
        return self.expected_rate < self.dark_rate

    def to_dict(self):
        return asdict(self)


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {v}")


def _budget(scenario, source_rate, path_eff, acceptance, det_eff, dark_rate, quoted=None, note=""):
    if source_rate < 0 or dark_rate < 0:
        raise ValueError("rates must be non-negative")
    _check_prob("path_efficiency", path_eff)
    _check_prob("geometric_acceptance", acceptance)
    _check_prob("detector_efficiency", det_eff)
    rate = source_rate * path_eff * acceptance * det_eff
    snr = rate / dark_rate if dark_rate > 0 else math.inf
    return RateBudget(scenario, source_rate, path_eff, acceptance, det_eff, rate, dark_rate, snr, quoted, note)


def budget_slit(source_rate, path_eff, detector_diameter, spread_extent, det_eff, dark_rate) -> RateBudget:
    """Single aperture: the detector intercepts ``diameter / extent`` of a 1-D spread beam."""
    if not spread_extent > 0:
        raise ValueError("spread_extent must be positive")
    if detector_diameter < 0:
        raise ValueError("detector_diameter must be non-negative")
    acc = min(detector_diameter / spread_extent, 1.0)
    return _budget("slit", source_rate, path_eff, acc, det_eff, dark_rate)


def budget_grating(source_rate, path_eff, peak_power_fraction, det_eff, dark_rate,
                   quoted_rate=constants.QUOTED_GRATING_RATE) -> RateBudget:
    """Grating: a lateral peak is focused onto the detector, so acceptance is its power fraction."""
    b = _budget("grating", source_rate, path_eff, peak_power_fraction, det_eff, dark_rate)
    note = ""
    if quoted_rate is not None and b.expected_rate > 0:
        ratio = quoted_rate / b.expected_rate
        if not 0.5 <= ratio <= 2.0:
            note = f"quoted {quoted_rate:.3g}/s differs from factor product {b.expected_rate:.3g}/s (x{ratio:.2f})"
    return RateBudget(**{**asdict(b), "quoted_rate": quoted_rate, "note": note})


@dataclass(frozen=True)
class EchoAdvisory:
    requested_rate: float
    ceiling: float
    level: str  # "acceptable", "at-limit" or "jamming-risk"
    message: str


def echo_ceiling(requested_rate, ceiling=constants.ECHO_CEILING, near=0.9) -> EchoAdvisory:
    """Classify a detection rate against the afterpulse (echo) ceiling."""
    if requested_rate < 0:
        raise ValueError("requested_rate must be non-negative")
    if requested_rate > ceiling:
        level, msg = "jamming-risk", "above the echo ceiling; afterpulses may dominate the registered counts"
    elif requested_rate >= near * ceiling:
        level, msg = "at-limit", "at the echo ceiling"
    else:
        level, msg = "acceptable", "below the echo ceiling"
    return EchoAdvisory(float(requested_rate), float(ceiling), level, msg)


def detected_rate(signal_rate, dark_rate=0.0, afterpulse_prob=0.0, afterpulse_mean_delay=0.0, dead_time=0.0) -> float:
    """Registered rate of one detector including echoes and non-paralyzable dead time.

    Echoes are counted once per registered tag and only if they land after
    the dead time, mirroring the simulator's single echo generation.
    """
    raw = signal_rate + dark_rate
    if dead_time > 0:
        raw = raw / (1.0 + raw * dead_time)
    if afterpulse_prob > 0:
        surv = math.exp(-dead_time / afterpulse_mean_delay) if afterpulse_mean_delay > 0 else 0.0
        return raw * (1.0 + afterpulse_prob * surv)
    return raw


def budget_table(budgets) -> str:
    cols = ("scenario", "source_rate", "path_efficiency", "geometric_acceptance",
            "detector_efficiency", "expected_rate", "dark_rate", "snr", "quoted_rate")
    lines = [f"{'':22s}" + "".join(f"{b.scenario:>14s}" for b in budgets)]
    for c in cols[1:]:
        cells = []
        for b in budgets:
            v = getattr(b, c)
            cells.append(f"{'-':>14s}" if v is None else f"{v:14.5g}")
        lines.append(f"{c:22s}" + "".join(cells))
    for b in budgets:
        if b.note:
            lines.append(f"note ({b.scenario}): {b.note}")
        if b.below_dark_noise:
            lines.append(f"note ({b.scenario}): expected rate is below the dark-count rate")
    return "\n".join(lines) + "\n"


def budget_csv(budgets) -> str:
    cols = ("scenario", "source_rate", "path_efficiency", "geometric_acceptance",
            "detector_efficiency", "expected_rate", "dark_rate", "snr", "quoted_rate", "note")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for b in budgets:
        w.writerow(["" if getattr(b, c) is None else getattr(b, c) for c in cols])
    return buf.getvalue()
