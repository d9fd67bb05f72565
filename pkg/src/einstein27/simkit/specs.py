"""Source, detector and tag-stream types used by the event simulator."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import constants

HERALD_CHANNEL = 1
HERALD_NAME = "D1"


@dataclass(frozen=True)
class Fock1:
    """Exactly one photon per herald."""

    def to_dict(self):
        return {"statistics": "Fock1"}


@dataclass(frozen=True)
class Coherent:
    """Poisson photon number per herald slot."""

    mean_photon_number: float = 1.0

    def __post_init__(self):
        if not self.mean_photon_number > 0:
            raise ValueError("Coherent mean_photon_number must be > 0")

    def to_dict(self):
        return {"statistics": "Coherent", "mean_photon_number": self.mean_photon_number}


@dataclass(frozen=True)
class SourceSpec:
    herald_rate: float = constants.HERALD_RATE
    path_efficiency: float = constants.PATH_EFFICIENCY
    statistics: Fock1 | Coherent = field(default_factory=Fock1)
    # timing jitter of the heralding detector D1
    herald_resolution_fwhm: float = constants.RESOLUTION_FWHM
    rate_cap: float = constants.ECHO_CEILING

    def __post_init__(self):
        if not self.herald_rate > 0:
            raise ValueError(f"herald_rate must be > 0, got {self.herald_rate}")
        if not 0.0 <= self.path_efficiency <= 1.0:
            raise ValueError(f"path_efficiency must be in [0, 1], got {self.path_efficiency}")
        if self.herald_resolution_fwhm < 0:
            raise ValueError("herald_resolution_fwhm must be >= 0")
        if self.herald_rate > self.rate_cap:
            warnings.warn(
                f"herald_rate {self.herald_rate:g}/s exceeds {self.rate_cap:g}/s: "
                "afterpulses become a significant share of registered counts",
                stacklevel=3,
            )


@dataclass(frozen=True)
class DetectorSpec:
    position_x: float = 0.0
    aperture_diameter: float = constants.DETECTOR_DIAMETER
    efficiency: float = constants.DETECTOR_EFFICIENCY
    dark_rate: float = constants.DARK_RATE
    resolution_fwhm: float = constants.RESOLUTION_FWHM
    afterpulse_prob: float = 0.0
    afterpulse_mean_delay: float = constants.AFTERPULSE_MEAN_DELAY
    dead_time: float = constants.DEAD_TIME
    name: str = "D2"
    channel: int = 2

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"{self.name}: efficiency must be in [0, 1]")
        if self.dark_rate < 0:
            raise ValueError(f"{self.name}: dark_rate must be >= 0")
        if not self.resolution_fwhm > 0:
            raise ValueError(f"{self.name}: resolution_fwhm must be > 0")
        if not 0.0 <= self.afterpulse_prob < 1.0:
            raise ValueError(f"{self.name}: afterpulse_prob must be in [0, 1)")
        if self.afterpulse_prob > 0 and not self.afterpulse_mean_delay > 0:
            raise ValueError(f"{self.name}: afterpulse_mean_delay must be > 0")
        if self.dead_time < 0:
            raise ValueError(f"{self.name}: dead_time must be >= 0")
        if not self.aperture_diameter > 0:
            raise ValueError(f"{self.name}: aperture_diameter must be > 0")
        if not 0 <= self.channel <= 255 or self.channel == HERALD_CHANNEL:
            raise ValueError(f"{self.name}: channel must be in 0..255 and not the herald channel")

    def covers(self, x):
        return np.abs(np.asarray(x) - self.position_x) <= self.aperture_diameter / 2


def check_detectors(detectors) -> None:
    if not detectors:
        raise ValueError("at least one screen detector is required")
    chans = [d.channel for d in detectors]
    if len(set(chans)) != len(chans):
        raise ValueError(f"duplicate detector channels: {chans}")
    names = [d.name for d in detectors]
    if len(set(names)) != len(names) or HERALD_NAME in names:
        raise ValueError(f"detector names must be unique and not {HERALD_NAME!r}: {names}")
    ordered = sorted(detectors, key=lambda d: d.position_x)
    for a, b in zip(ordered, ordered[1:]):
        if b.position_x - a.position_x < (a.aperture_diameter + b.aperture_diameter) / 2:
            raise ValueError(f"detector apertures overlap: {a.name} and {b.name}")


@dataclass(frozen=True)
class ChannelOffsets:
    """Fixed latency per detector name, in seconds."""

    latency: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.latency.items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"offset for {k} must be finite and >= 0, got {v}")

    def get(self, name: str) -> float:
        return float(self.latency.get(name, 0.0))

    def ps(self, name: str) -> int:
        return int(round(self.get(name) * constants.PS_PER_S))


@dataclass(frozen=True)
class TimeTag:
    channel: int
    t_ps: int


class TagStream:
    """Time-ordered (channel, picosecond) records plus run metadata."""

    def __init__(self, channels, t_ps, header=None, check=True):
        ch = np.ascontiguousarray(channels, dtype=np.uint8)
        t = np.ascontiguousarray(t_ps, dtype=np.int64)
        if ch.shape != t.shape or ch.ndim != 1:
            raise ValueError("channels and t_ps must be 1-D arrays of equal length")
        if check:
            if t.size and t[0] < 0:
                raise ValueError("negative timestamp")
            if t.size > 1:
                dt = np.diff(t)
                bad = (dt < 0) | ((dt == 0) & (np.diff(ch.astype(np.int16)) < 0))
                if np.any(bad):
                    raise ValueError("tag stream is not sorted by (t_ps, channel)")
        ch.setflags(write=False)
        t.setflags(write=False)
        self.channels = ch
        self.t_ps = t
        self.header = dict(header or {})

    @classmethod
    def from_unsorted(cls, channels, t_ps, header=None) -> "TagStream":
        ch = np.asarray(channels, dtype=np.uint8)
        t = np.asarray(t_ps, dtype=np.int64)
        order = np.lexsort((ch, t))
        return cls(ch[order], t[order], header)

    @classmethod
    def merge(cls, streams, header=None) -> "TagStream":
        ch = np.concatenate([s.channels for s in streams]) if streams else np.empty(0, np.uint8)
        t = np.concatenate([s.t_ps for s in streams]) if streams else np.empty(0, np.int64)
        return cls.from_unsorted(ch, t, header)

    def __len__(self):
        return self.t_ps.size

    def __iter__(self):
        for c, t in zip(self.channels.tolist(), self.t_ps.tolist()):
            yield TimeTag(c, t)

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            np.array_equal(self.channels, other.channels)
            and np.array_equal(self.t_ps, other.t_ps)
            and self.header == other.header
        )

    def channel(self, ch: int) -> np.ndarray:
        """Sorted timestamps of one channel."""
        return self.t_ps[self.channels == ch]

    def channel_ids(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.channels))

    def channel_by_name(self, name: str) -> int:
        chans = self.header.get("channels", {})
        if name in chans:
            return int(chans[name])
        try:
            return int(name)
        except ValueError:
            raise KeyError(f"unknown channel {name!r}; known: {sorted(chans)}") from None

    def counts(self) -> dict[int, int]:
        ids, n = np.unique(self.channels, return_counts=True)
        return {int(i): int(k) for i, k in zip(ids, n)}
