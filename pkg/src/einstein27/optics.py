"""Far-field (Fraunhofer) intensity of a transmission grating on a focal screen.

The screen coordinate follows ``x = f * theta`` by default. Profiles are
tabulated on a non-uniform angular grid, refined around every diffraction
order, and stored as discrete probability masses (weights summing to one).
Each weight is the intensity integrated over its cell in ``sin(theta)``,
which is the variable the Fraunhofer pattern is a function of.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import constants

_SINGULAR_EPS = 1e-6


class ProfileError(ValueError):
    """Raised when a screen profile cannot be built or is malformed."""


@dataclass(frozen=True)
class GratingSpec:
    period_p: float = constants.PERIOD_P
    aperture_a: float = constants.APERTURE_A
    lines_illuminated_N: int = constants.LINES_ILLUMINATED
    wavelength_lambda: float = constants.WAVELENGTH

    def __post_init__(self):
        if not (self.period_p > 0 and 0 < self.aperture_a <= self.period_p):
            raise ValueError(
                f"need 0 < aperture_a <= period_p, got a={self.aperture_a}, p={self.period_p}"
            )
        if int(self.lines_illuminated_N) != self.lines_illuminated_N or self.lines_illuminated_N < 1:
            raise ValueError(f"lines_illuminated_N must be a positive integer, got {self.lines_illuminated_N}")
        if not self.wavelength_lambda > 0:
            raise ValueError(f"wavelength_lambda must be positive, got {self.wavelength_lambda}")

    @classmethod
    def reference(cls) -> "GratingSpec":
        """Symmetric 800 lines/mm grating at 800 nm, 2000 lines illuminated."""
        return cls()


@dataclass(frozen=True)
class ScreenGeometry:
    focal_f: float = constants.FOCAL_F
    extent_halfwidth: float = 3.0
    sample_count: int = 2**20
    # "angle": x = f*theta, "tan": x = f*tan(theta)
    mapping: str = "angle"
    refine_factor: int = 16
    refine_halfwidth_peaks: float = 10.0

    def __post_init__(self):
        if not self.focal_f > 0:
            raise ValueError(f"focal_f must be positive, got {self.focal_f}")
        if not self.extent_halfwidth > 0:
            raise ValueError(f"extent_halfwidth must be positive, got {self.extent_halfwidth}")
        if int(self.sample_count) != self.sample_count or self.sample_count < 2:
            raise ValueError(f"sample_count must be an integer >= 2, got {self.sample_count}")
        if self.mapping not in ("angle", "tan"):
            raise ValueError(f"mapping must be 'angle' or 'tan', got {self.mapping!r}")
        if self.refine_factor < 1:
            raise ValueError("refine_factor must be >= 1")

    def to_screen(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.mapping == "tan":
            return self.focal_f * np.tan(theta)
        return self.focal_f * theta

    def to_angle(self, x):
        x = np.asarray(x, dtype=float)
        if self.mapping == "tan":
            return np.arctan(x / self.focal_f)
        return x / self.focal_f

    @property
    def theta_max(self) -> float:
        return min(float(self.to_angle(self.extent_halfwidth)), math.pi / 2)


@dataclass(frozen=True, eq=False)
class IntensityProfile:
    """Normalized screen intensity tabulated at increasing positions.

    ``weights[i]`` is the probability mass of the cell around ``positions[i]``;
    cell edges sit halfway between neighbouring positions.
    """

    positions: np.ndarray
    weights: np.ndarray
    center_of_mass: float = field(default=float("nan"))
    truncated: bool = False

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape:
            raise ProfileError("positions and weights must be 1-D arrays of equal length")
        if x.size == 0:
            raise ProfileError("empty profile")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(w)):
            raise ProfileError("profile contains non-finite values")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ProfileError("positions must be strictly increasing")
        if np.any(w < 0):
            raise ProfileError("weights must be non-negative")
        total = float(np.sum(w))
        if abs(total - 1.0) > 1e-12:
            raise ProfileError(f"weights must sum to 1, got {total!r}")
        cm = float(np.dot(x, w))
        if math.isnan(self.center_of_mass):
            object.__setattr__(self, "center_of_mass", cm)
        else:
            extent = max(float(x[-1] - x[0]), abs(float(x[0])), abs(float(x[-1])), 1e-300)
            if abs(self.center_of_mass - cm) > 1e-12 * extent:
                raise ProfileError("center_of_mass inconsistent with positions/weights")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unnormalized(cls, positions, intensities, truncated=False) -> "IntensityProfile":
        w = np.asarray(intensities, dtype=float)
        total = float(np.sum(w))
        if not total > 0:
            raise ProfileError("profile has no positive weight")
        w = w / total
        # one corrective pass so the sum is 1 to rounding
        w = w / float(np.sum(w))
        return cls(np.asarray(positions, dtype=float), w, truncated=truncated)

    def __len__(self):
        return self.positions.size

    @cached_property
    def edges(self) -> np.ndarray:
        x = self.positions
        if x.size == 1:
            return np.array([x[0], x[0]])
        mid = 0.5 * (x[1:] + x[:-1])
        return np.concatenate(([x[0] - (mid[0] - x[0])], mid, [x[-1] + (x[-1] - mid[-1])]))

    @cached_property
    def cdf_at_edges(self) -> np.ndarray:
        c = np.concatenate(([0.0], np.cumsum(self.weights)))
        c[-1] = 1.0
        return c

    def cdf(self, x):
        """Piecewise-linear CDF matching :func:`sample_position`."""
        return np.interp(x, self.edges, self.cdf_at_edges, left=0.0, right=1.0)

    def shifted(self, dx: float) -> "IntensityProfile":
        return IntensityProfile(self.positions + dx, self.weights, truncated=self.truncated)

    def mirrored(self) -> "IntensityProfile":
        return IntensityProfile(-self.positions[::-1], self.weights[::-1].copy(), truncated=self.truncated)

    def scaled(self, k: float) -> "IntensityProfile":
        if not k > 0:
            raise ValueError("scale factor must be positive")
        return IntensityProfile(self.positions * k, self.weights, truncated=self.truncated)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("x_m,weight\n")
            for x, w in zip(self.positions.tolist(), self.weights.tolist()):
                fh.write(f"{x!r},{w!r}\n")

    @classmethod
    def from_csv(cls, path) -> "IntensityProfile":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["x_m", "weight"]:
                raise ProfileError(f"{path}: expected header 'x_m,weight', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
        if not rows:
            raise ProfileError(f"{path}: no profile rows")
        x, w = np.array(rows).T
        return cls.from_unnormalized(x, w)


def _sin_ratio(z):
    """sin(z)/z with a series branch near zero."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _SINGULAR_EPS
    zs = z[small]
    out[small] = 1.0 - zs * zs / 6.0
    zl = z[~small]
    out[~small] = np.sin(zl) / zl
    return out


def _array_factor(gamma, n: int):
    """sin(N*gamma) / (N*sin(gamma)), squared, with limits at gamma = k*pi."""
    gamma = np.asarray(gamma, dtype=float)
    k = np.rint(gamma / math.pi)
    delta = gamma - k * math.pi
    out = np.empty_like(gamma)
    small = np.abs(delta) < _SINGULAR_EPS
    d = delta[small]
    out[small] = 1.0 - (n * n - 1) * d * d / 6.0
    d = delta[~small]
    # sin(N(k pi + d)) / sin(k pi + d) = (-1)^{k(N-1)} sin(N d)/sin(d); sign drops on squaring
    out[~small] = np.sin(n * d) / (n * np.sin(d))
    return out * out


def relative_intensity(grating: GratingSpec, theta):
    """Multi-slit Fraunhofer intensity normalized to 1 at ``theta = 0``.

    Accepts scalars or arrays. Raises ``ValueError`` for angles outside
    the forward half-space ``|theta| <= pi/2``.
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > math.pi / 2):
        raise ValueError("non-propagating direction: need finite |theta| <= pi/2")
    s = np.sin(theta)
    lam = grating.wavelength_lambda
    beta = math.pi * grating.aperture_a / lam * s
    gamma = math.pi * grating.period_p / lam * s
    out = _sin_ratio(beta) ** 2 * _array_factor(gamma, int(grating.lines_illuminated_N))
    if out.ndim == 0:
        return float(out)
    return out


def _aperture_zero(grating: GratingSpec, m: int) -> bool:
    if m == 0:
        return False
    r = m * grating.aperture_a / grating.period_p
    return abs(r - round(r)) < 1e-12


def peak_angles(grating: GratingSpec) -> list[tuple[int, float]]:
    """Propagating diffraction orders ``(m, theta_m)`` with ``sin(theta_m) = m*lambda/p``.

    Orders where the single-aperture factor vanishes (e.g. even orders of a
    ``p = 2a`` grating) are excluded.
    """
    if grating.lines_illuminated_N == 1:
        # a single aperture has no grating orders, only the central lobe
        return [(0, 0.0)]
    ratio = grating.wavelength_lambda / grating.period_p
    m_max = int(math.floor(1.0 / ratio + 1e-12))
    out = []
    for m in range(-m_max, m_max + 1):
        s = m * ratio
        if abs(s) > 1.0 or _aperture_zero(grating, m):
            continue
        out.append((m, math.asin(max(-1.0, min(1.0, s)))))
    return out


def peak_halfwidth(grating: GratingSpec, theta: float) -> float:
    """Angular distance from an order's maximum to its first null."""
    c = math.cos(theta)
    if c <= 0:
        return math.inf
    if grating.lines_illuminated_N == 1:
        return grating.wavelength_lambda / (grating.aperture_a * c)
    return grating.wavelength_lambda / (grating.lines_illuminated_N * grating.period_p * c)


def _angular_grid(grating: GratingSpec, geom: ScreenGeometry, orders) -> np.ndarray:
    tmax = geom.theta_max
    base = np.linspace(-tmax, tmax, int(geom.sample_count))
    dtheta = 2 * tmax / (geom.sample_count - 1)
    step = dtheta / geom.refine_factor
    parts = [base]
    for _, th in orders:
        w = peak_halfwidth(grating, th)
        half = geom.refine_halfwidth_peaks * w
        lo, hi = max(th - half, -tmax), min(th + half, tmax)
        if hi <= lo:
            continue
        n = int(math.ceil((hi - lo) / step)) + 1
        parts.append(np.linspace(lo, hi, n))
    grid = np.unique(np.concatenate(parts))
    # drop near-duplicates that would give degenerate cells
    keep = np.concatenate(([True], np.diff(grid) > 1e-15 * max(tmax, 1.0)))
    return grid[keep]


def screen_profile(grating: GratingSpec, geom: ScreenGeometry, min_peak_samples: int = 9) -> IntensityProfile:
    """Tabulate the grating pattern on the screen as a normalized profile."""
    tmax = geom.theta_max
    all_orders = peak_angles(grating)
    inside = [(m, th) for m, th in all_orders if abs(th) <= tmax]
    if len(all_orders) > 1 and all(m == 0 for m, _ in inside):
        raise ProfileError("screen extent does not include any lateral diffraction order")
    truncated = len(inside) < len(all_orders)
    if truncated:
        warnings.warn(
            "screen extent does not cover the outermost propagating order; profile is truncated",
            stacklevel=2,
        )
    theta = _angular_grid(grating, geom, inside)
    for m, th in inside:
        w = peak_halfwidth(grating, th)
        n_in = int(np.count_nonzero(np.abs(theta - th) <= w))
        if n_in < min_peak_samples:
            raise ProfileError(
                f"order {m}: only {n_in} samples across the peak (need {min_peak_samples}); "
                "increase sample_count"
            )
    mid = 0.5 * (theta[1:] + theta[:-1])
    t_edges = np.concatenate(([theta[0]], mid, [theta[-1]]))
    cell = np.diff(np.sin(t_edges))
    intensity = relative_intensity(grating, theta) * cell
    return IntensityProfile.from_unnormalized(geom.to_screen(theta), intensity, truncated=truncated)


def spot_profile(fwhm: float = 100e-6, center: float = 0.0, sample_count: int = 401, span_fwhm: float = 6.0) -> IntensityProfile:
    """Narrow Gaussian focal spot, the screen pattern with the grating removed."""
    if not fwhm > 0:
        raise ValueError("spot fwhm must be positive")
    sigma = fwhm * constants.FWHM_TO_SIGMA
    x = np.linspace(-span_fwhm * fwhm / 2, span_fwhm * fwhm / 2, sample_count)
    return IntensityProfile.from_unnormalized(x + center, np.exp(-0.5 * (x / sigma) ** 2))


def sample_position(profile: IntensityProfile, u):
    """Inverse-CDF sample of a screen coordinate for uniform ``u`` in [0, 1).

    Linear interpolation inside each cell, so the output density is
    piecewise constant. Zero-weight cells are never returned.
    """
    u = np.asarray(u, dtype=float)
    cdf = profile.cdf_at_edges
    edges = profile.edges
    k = np.searchsorted(cdf, u, side="right") - 1
    k = np.clip(k, 0, profile.weights.size - 1)
    # u at/after the last step: fall back to the last non-empty cell
    nz = np.flatnonzero(profile.weights > 0)
    k = np.where(profile.weights[k] > 0, k, nz[-1])
    w = profile.weights[k]
    frac = np.clip((u - cdf[k]) / w, 0.0, 1.0)
    x = edges[k] + frac * (edges[k + 1] - edges[k])
    if x.ndim == 0:
        return float(x)
    return x


def order_windows(grating: GratingSpec, geom: ScreenGeometry, m: int) -> tuple[float, float]:
    """Screen interval of order ``m``: half an order spacing either side in sin(theta)."""
    r = grating.wavelength_lambda / grating.period_p
    lo = max(-1.0, (m - 0.5) * r)
    hi = min(1.0, (m + 0.5) * r)
    return float(geom.to_screen(math.asin(lo))), float(geom.to_screen(math.asin(hi)))


def window_fraction(profile: IntensityProfile, lo: float, hi: float) -> float:
    """Profile mass inside ``[lo, hi]`` using the piecewise-linear CDF."""
    return float(profile.cdf(hi) - profile.cdf(lo))


@dataclass(frozen=True)
class PeakRow:
    order: int
    theta: float
    x: float
    relative_height: float
    fraction: float


def peak_table(grating: GratingSpec, geom: ScreenGeometry, profile: IntensityProfile) -> list[PeakRow]:
    rows = []
    tmax = geom.theta_max
    for m, th in peak_angles(grating):
        if abs(th) > tmax:
            continue
        lo, hi = order_windows(grating, geom, m)
        rows.append(
            PeakRow(
                order=m,
                theta=th,
                x=float(geom.to_screen(th)),
                relative_height=relative_intensity(grating, th),
                fraction=window_fraction(profile, lo, hi),
            )
        )
    return rows


def first_order_x(grating: GratingSpec, geom: ScreenGeometry, m: int = 1) -> float:
    for order, th in peak_angles(grating):
        if order == m:
            return float(geom.to_screen(th))
    raise ValueError(f"order {m} does not propagate for this grating")


def write_peak_table(rows, path) -> None:
    Path(path).write_text(
        "order,theta_rad,x_m,relative_height,fraction\n"
        + "".join(f"{r.order},{r.theta!r},{r.x!r},{r.relative_height!r},{r.fraction!r}\n" for r in rows)
    )
