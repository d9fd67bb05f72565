"""Run configuration: one JSON document describing source, optics, detectors and run."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import constants
from .collapse import CollapseModel
from .optics import GratingSpec, IntensityProfile, ScreenGeometry, first_order_x, screen_profile, spot_profile
from .simkit.specs import ChannelOffsets, Coherent, DetectorSpec, Fock1, SourceSpec, check_detectors

SECTIONS = ("source", "grating", "screen", "detectors", "collapse", "offsets", "run", "analysis")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def reference_config_dict() -> dict:
    """The grating experiment with the parameters used throughout the feasibility estimate."""
    det = {
        "aperture_diameter": constants.DETECTOR_DIAMETER,
        "efficiency": constants.DETECTOR_EFFICIENCY,
        "dark_rate": constants.DARK_RATE,
        "resolution_fwhm": constants.RESOLUTION_FWHM,
        "afterpulse_prob": 0.01,
        "afterpulse_mean_delay": constants.AFTERPULSE_MEAN_DELAY,
        "dead_time": constants.DEAD_TIME,
    }
    return {
        "source": {
            "herald_rate": constants.HERALD_RATE,
            "path_efficiency": constants.PATH_EFFICIENCY,
            "statistics": "Fock1",
            "mean_photon_number": 1.0,
            "herald_resolution_fwhm": constants.RESOLUTION_FWHM,
        },
        "grating": {
            "period_p": constants.PERIOD_P,
            "aperture_a": constants.APERTURE_A,
            "lines_illuminated_N": constants.LINES_ILLUMINATED,
            "wavelength_lambda": constants.WAVELENGTH,
        },
        "screen": {
            "focal_f": constants.FOCAL_F,
            "extent_halfwidth": 3.0,
            "sample_count": 2**20,
            "mapping": "angle",
            "spot_fwhm": 100e-6,
        },
        "detectors": [
            {"name": "D2", "channel": 2, "order": 1, **det},
            {"name": "D3", "channel": 3, "order": -1, **det},
        ],
        "collapse": {"model": "HellwigKraus"},
        "offsets": {"D1": 12e-9, "D2": 37e-9, "D3": 37e-9},
        "run": {"duration_s": 60.0, "seed": 1927, "chunk_s": 1.0, "primary": "D2"},
        "analysis": {
            "bin_width_s": 2e-9,
            "range_s": 50e-9,
            "window_s": 2e-9,
            "min_significance": 5.0,
            "k_sigma": 2.0,
        },
    }


@dataclass(frozen=True)
class RunSection:
    duration_s: float = 60.0
    seed: int = 1927
    chunk_s: float = 1.0
    primary: str = "D2"


@dataclass(frozen=True)
class AnalysisSection:
    bin_width_s: float = 2e-9
    range_s: float = 50e-9
    window_s: float = 2e-9
    min_significance: float = 5.0
    k_sigma: float = 2.0

    @property
    def bin_ps(self) -> int:
        return int(round(self.bin_width_s * constants.PS_PER_S))

    @property
    def range_ps(self) -> tuple[int, int]:
        """Histogram range with bins centred on multiples of the bin width."""
        b = self.bin_ps
        n = int(round(self.range_s * constants.PS_PER_S)) // b
        return (-n * b - b // 2, n * b + b - b // 2)

    @property
    def window_ps(self) -> int:
        return int(round(self.window_s * constants.PS_PER_S))


@dataclass
class RunConfig:
    source: SourceSpec
    grating: GratingSpec | None
    screen: ScreenGeometry
    spot_fwhm: float
    detectors: list[DetectorSpec]
    collapse: CollapseModel
    offsets: ChannelOffsets
    run: RunSection
    analysis: AnalysisSection
    raw: dict = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = copy.deepcopy(doc)
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            source = _source(doc.get("source") or {})
            g = doc.get("grating")
            grating = GratingSpec(**g) if g else None
            scr = dict(doc.get("screen") or {})
            spot = float(scr.pop("spot_fwhm", 100e-6))
            screen = ScreenGeometry(**scr)
            detectors = [_detector(d, i, grating, screen) for i, d in enumerate(doc.get("detectors") or [])]
            check_detectors(detectors)
            for d in detectors:
                if abs(d.position_x) > screen.extent_halfwidth:
                    raise ConfigError(f"detector {d.name} at x={d.position_x} m is off the screen")
            coll = doc.get("collapse") or {}
            model = CollapseModel.parse(coll.get("model", "Instantaneous"))
            offsets = ChannelOffsets(dict(doc.get("offsets") or {}))
            run = RunSection(**(doc.get("run") or {}))
            if "seed" not in (doc.get("run") or {}):
                raise ConfigError("run.seed is required")
            if not run.duration_s > 0:
                raise ConfigError(f"run.duration_s must be positive, got {run.duration_s}")
            if run.primary not in {d.name for d in detectors}:
                raise ConfigError(f"run.primary {run.primary!r} is not a configured detector")
            analysis = AnalysisSection(**(doc.get("analysis") or {}))
            if analysis.bin_ps <= 0 or analysis.window_ps <= 0 or analysis.range_s <= 0:
                raise ConfigError("analysis bin width, window and range must be positive")
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        return cls(source, grating, screen, spot, detectors, model, offsets, run, analysis, doc)

    @classmethod
    def load(cls, path, overrides=()) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(apply_overrides(doc, overrides))

    @classmethod
    def reference(cls, overrides=()) -> "RunConfig":
        return cls.from_dict(apply_overrides(reference_config_dict(), overrides))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def detector(self, name: str) -> DetectorSpec:
        for d in self.detectors:
            if d.name == name:
                return d
        raise ConfigError(f"no detector named {name!r}")

    def grating_profile(self) -> IntensityProfile:
        if self.grating is None:
            raise ConfigError("no grating configured")
        if "grating" not in self._cache:
            self._cache["grating"] = screen_profile(self.grating, self.screen)
        return self._cache["grating"]

    def spot_profile(self) -> IntensityProfile:
        if "spot" not in self._cache:
            self._cache["spot"] = spot_profile(self.spot_fwhm)
        return self._cache["spot"]

    def screen_profile(self) -> IntensityProfile:
        """Profile with the grating in place, or the bare spot without one."""
        return self.grating_profile() if self.grating is not None else self.spot_profile()

    def phase_plan(self) -> dict:
        """Profile and detector layout of each protocol phase."""
        baseline = [replace(d, position_x=0.0) if d.name == self.run.primary else d for d in self.detectors]
        try:
            check_detectors(baseline)
        except ValueError as exc:
            raise ConfigError(f"baseline phase: {exc}") from None
        return {
            "baseline": (self.spot_profile(), baseline),
            "grating": (self.grating_profile(), list(self.detectors)),
        }


def _source(d: dict) -> SourceSpec:
    d = dict(d)
    kind = d.pop("statistics", "Fock1")
    mean = d.pop("mean_photon_number", 1.0)
    if kind == "Fock1":
        stats = Fock1()
    elif kind == "Coherent":
        stats = Coherent(float(mean))
    else:
        raise ConfigError(f"source.statistics must be 'Fock1' or 'Coherent', got {kind!r}")
    return SourceSpec(statistics=stats, **d)


def _detector(d: dict, i: int, grating, screen) -> DetectorSpec:
    d = dict(d)
    d.setdefault("name", f"D{i + 2}")
    d.setdefault("channel", i + 2)
    order = d.pop("order", None)
    if order is not None:
        if "position_x" in d:
            raise ConfigError(f"detector {d['name']}: give either order or position_x, not both")
        if grating is None:
            raise ConfigError(f"detector {d['name']}: placement by order needs a grating")
        d["position_x"] = first_order_x(grating, screen, int(order))
    return DetectorSpec(**d)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``section.key=value`` overrides; list items are addressed by index."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        path, sep, value = item.partition("=")
        if not sep or not path:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        keys = path.split(".")
        node = doc
        for k in keys[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(k)]
                except (ValueError, IndexError):
                    raise ConfigError(f"override {item!r}: bad list index {k!r}") from None
            else:
                if node.get(k) is None:
                    node[k] = {}
                node = node[k]
        last = keys[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = _parse_value(value)
            except (ValueError, IndexError):
                raise ConfigError(f"override {item!r}: bad list index {last!r}") from None
        else:
            node[last] = _parse_value(value)
    return doc
