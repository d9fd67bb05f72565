"""Spread of a screen distribution and the two collapse hypotheses.

Under covariant (Hellwig-Kraus) reduction a state spread over a distance
``s`` is observed ``s / c`` later than a localized one. The spread is the
intensity-weighted mean absolute distance from the center of mass,
evaluated with the profile's own cells so that it agrees with the
distribution the simulator samples from.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constants import C
from .optics import IntensityProfile, ProfileError


@dataclass(frozen=True)
class SpreadResult:
    spread_s: float  # m
    t_delay: float  # s

    @property
    def t_delay_ns(self) -> float:
        return self.t_delay * 1e9


class CollapseModel(enum.Enum):
    INSTANTANEOUS = "Instantaneous"
    HELLWIG_KRAUS = "HellwigKraus"

    @classmethod
    def parse(cls, value) -> "CollapseModel":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown collapse model {value!r}; expected Instantaneous or HellwigKraus")


def spread(profile: IntensityProfile) -> SpreadResult:
    """Mean absolute deviation of the profile about its center of mass."""
    if not isinstance(profile, IntensityProfile):
        raise ProfileError("spread() needs an IntensityProfile")
    w = profile.weights
    if w.size == 0:
        raise ProfileError("empty profile")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ProfileError("profile is not normalized")
    dev = np.abs(profile.positions - profile.center_of_mass)
    s = float(np.dot(dev, w))
    return SpreadResult(spread_s=s, t_delay=s / C)


def detection_delay(model: CollapseModel, profile: IntensityProfile) -> float:
    """Delay in seconds applied to every detection drawn from ``profile``."""
    model = CollapseModel.parse(model)
    if model is CollapseModel.INSTANTANEOUS:
        return 0.0
    return spread(profile).t_delay


def is_narrow(profile: IntensityProfile, resolution: float) -> bool:
    """True when the profile's width (twice its spread) is below ``resolution * c``."""
    return 2.0 * spread(profile).spread_s < resolution * C
