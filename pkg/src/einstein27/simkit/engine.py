"""Discrete-event Monte Carlo of the heralded diffraction experiment.

Every random draw comes from a generator seeded by ``(seed, stream, key...)``
through :class:`numpy.random.SeedSequence`, and herald-driven work is cut
into fixed time chunks with their own substreams. Output is therefore a
pure function of the inputs and seed, independent of how chunks are
scheduled.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict

import numpy as np
from numba import njit

from .. import constants
from ..collapse import CollapseModel, detection_delay
from ..optics import IntensityProfile, sample_position
from .specs import (
    HERALD_CHANNEL,
    HERALD_NAME,
    ChannelOffsets,
    Coherent,
    DetectorSpec,
    Fock1,
    SourceSpec,
    TagStream,
    check_detectors,
)

# substream identifiers
_HERALDS, _DETECT, _HJITTER, _DARK, _AFTERPULSE = 1, 2, 3, 4, 5

DEFAULT_CHUNK_S = 1.0


def _seed_words(seed) -> list[int]:
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


def _rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_seed_words(seed) + [int(k) for k in keys]))


def _chunk_edges(duration_ps: int, chunk_ps: int) -> np.ndarray:
    n = max(1, -(-duration_ps // chunk_ps))
    edges = np.arange(n + 1, dtype=np.int64) * chunk_ps
    edges[-1] = duration_ps
    return edges


def _duration_ps(duration: float) -> int:
    if not (duration > 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be positive, got {duration}")
    return int(round(duration * constants.PS_PER_S))


@njit(cache=True)
def _dead_time_mask(t, dead_ps):
    keep = np.ones(t.size, dtype=np.bool_)
    if dead_ps <= 0 or t.size == 0:
        return keep
    last = t[0]
    for i in range(1, t.size):
        if t[i] - last < dead_ps:
            keep[i] = False
        else:
            last = t[i]
    return keep


def apply_dead_time(t_ps: np.ndarray, dead_time: float) -> np.ndarray:
    """Non-paralyzable dead time on one channel's sorted timestamps."""
    dead_ps = int(round(dead_time * constants.PS_PER_S))
    return t_ps[_dead_time_mask(np.ascontiguousarray(t_ps, dtype=np.int64), dead_ps)]


def generate_heralds(source: SourceSpec, duration: float, rng_seed, chunk_s: float = DEFAULT_CHUNK_S) -> TagStream:
    """Poisson herald (pair creation) times on channel D1, before D1 latency and jitter."""
    dur_ps = _duration_ps(duration)
    edges = _chunk_edges(dur_ps, int(round(chunk_s * constants.PS_PER_S)))
    parts = []
    for c in range(edges.size - 1):
        lo, hi = int(edges[c]), int(edges[c + 1])
        rng = _rng(rng_seed, _HERALDS, c)
        n = rng.poisson(source.herald_rate * (hi - lo) / constants.PS_PER_S)
        parts.append(np.sort(rng.integers(lo, hi, size=n, dtype=np.int64)))
    t = np.concatenate(parts)
    header = {
        "kind": "heralds",
        "seed": _seed_words(rng_seed),
        "duration_s": duration,
        "herald_rate": source.herald_rate,
        "chunk_s": chunk_s,
        "channels": {HERALD_NAME: HERALD_CHANNEL},
    }
    return TagStream(np.full(t.size, HERALD_CHANNEL, np.uint8), t, header)


def specs_hash(source, detectors, model, offsets, profile) -> str:
    doc = {
        "source": asdict(source),
        "detectors": [asdict(d) for d in detectors],
        "model": CollapseModel.parse(model).value,
        "offsets": dict(sorted(offsets.latency.items())),
    }
    h = hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode())
    h.update(np.ascontiguousarray(profile.positions).tobytes())
    h.update(np.ascontiguousarray(profile.weights).tobytes())
    return h.hexdigest()


def _screen_photons(rng, n_heralds: int, source: SourceSpec):
    """Herald index of each photon that reaches the screen plane."""
    stats = source.statistics
    if isinstance(stats, Coherent):
        n_ph = rng.poisson(stats.mean_photon_number, size=n_heralds)
        idx = np.repeat(np.arange(n_heralds, dtype=np.int64), n_ph)
    elif isinstance(stats, Fock1):
        idx = np.arange(n_heralds, dtype=np.int64)
    else:
        raise TypeError(f"unsupported photon statistics {stats!r}")
    # loss acts photon by photon, which keeps Poisson light Poissonian
    return idx[rng.random(idx.size) < source.path_efficiency]


def propagate_and_detect(
    heralds: TagStream,
    profile: IntensityProfile,
    detectors: list[DetectorSpec],
    model: CollapseModel,
    offsets: ChannelOffsets,
    rng_seed,
    source: SourceSpec | None = None,
    duration: float | None = None,
    diagnostics: bool = False,
):
    """Turn herald times into the full tag stream of D1 and all screen detectors.

    With ``diagnostics=True`` a second value is returned: the number of
    registered screen photons per herald, counted before dead time,
    darks and afterpulses.
    """
    source = source or SourceSpec()
    detectors = list(detectors)
    check_detectors(detectors)
    if duration is None:
        duration = heralds.header.get("duration_s")
        if duration is None:
            raise ValueError("duration not given and not recorded in the herald stream")
    dur_ps = _duration_ps(duration)
    chunk_s = heralds.header.get("chunk_s", DEFAULT_CHUNK_S)
    edges = _chunk_edges(dur_ps, int(round(chunk_s * constants.PS_PER_S)))

    h_all = heralds.channel(HERALD_CHANNEL)
    delay_s = detection_delay(model, profile)
    delay_ps = delay_s * constants.PS_PER_S
    h_sigma_ps = source.herald_resolution_fwhm * constants.FWHM_TO_SIGMA * constants.PS_PER_S
    d1_off = offsets.ps(HERALD_NAME)

    d1_parts = []
    sig_parts = {d.channel: [] for d in detectors}
    per_herald = np.zeros(h_all.size, dtype=np.int64) if diagnostics else None
    bounds = np.searchsorted(h_all, edges, side="left")
    for c in range(edges.size - 1):
        i0, i1 = int(bounds[c]), int(bounds[c + 1])
        h = h_all[i0:i1]
        jr = _rng(rng_seed, _HJITTER, c)
        d1_parts.append(h + d1_off + np.rint(jr.standard_normal(h.size) * h_sigma_ps).astype(np.int64))

        rng = _rng(rng_seed, _DETECT, c)
        idx = _screen_photons(rng, h.size, source)
        x = sample_position(profile, rng.random(idx.size))
        u_det = rng.random(idx.size)
        jit = rng.standard_normal(idx.size)
        for d in detectors:
            sel = d.covers(x) & (u_det < d.efficiency)
            if diagnostics:
                np.add.at(per_herald, idx[sel] + i0, 1)
            sigma_ps = d.resolution_fwhm * constants.FWHM_TO_SIGMA * constants.PS_PER_S
            shift = np.rint(offsets.ps(d.name) + delay_ps + jit[sel] * sigma_ps).astype(np.int64)
            sig_parts[d.channel].append(h[idx[sel]] + shift)

    out_ch, out_t = [], []
    d1 = np.sort(np.concatenate(d1_parts)) if d1_parts else np.empty(0, np.int64)
    d1 = d1[(d1 >= 0) & (d1 < dur_ps)]
    out_ch.append(np.full(d1.size, HERALD_CHANNEL, np.uint8))
    out_t.append(d1)

    for d in detectors:
        t = np.concatenate(sig_parts[d.channel] + _dark_counts(d, edges, rng_seed))
        t = np.sort(t)
        t = t[(t >= 0) & (t < dur_ps)]
        t = apply_dead_time(t, d.dead_time)
        t = _afterpulses(d, t, rng_seed, dur_ps)
        out_ch.append(np.full(t.size, d.channel, np.uint8))
        out_t.append(t)

    header = {
        "kind": "tags",
        "seed": _seed_words(rng_seed),
        "duration_s": duration,
        "model": CollapseModel.parse(model).value,
        "t_delay_s": delay_s,
        "channels": {HERALD_NAME: HERALD_CHANNEL, **{d.name: d.channel for d in detectors}},
        "specs_hash": specs_hash(source, detectors, model, offsets, profile),
    }
    stream = TagStream.from_unsorted(np.concatenate(out_ch), np.concatenate(out_t), header)
    if diagnostics:
        return stream, per_herald
    return stream


def _dark_counts(d: DetectorSpec, edges, rng_seed) -> list[np.ndarray]:
    out = []
    if d.dark_rate <= 0:
        return out
    for c in range(edges.size - 1):
        lo, hi = int(edges[c]), int(edges[c + 1])
        rng = _rng(rng_seed, _DARK, d.channel, c)
        n = rng.poisson(d.dark_rate * (hi - lo) / constants.PS_PER_S)
        out.append(rng.integers(lo, hi, size=n, dtype=np.int64))
    return out


def _afterpulses(d: DetectorSpec, t: np.ndarray, rng_seed, dur_ps: int) -> np.ndarray:
    """One generation of echoes after registered tags, then dead time again."""
    if d.afterpulse_prob <= 0 or t.size == 0:
        return t
    rng = _rng(rng_seed, _AFTERPULSE, d.channel)
    fire = rng.random(t.size) < d.afterpulse_prob
    extra = rng.exponential(d.afterpulse_mean_delay * constants.PS_PER_S, size=t.size)
    echoes = t[fire] + np.rint(extra[fire]).astype(np.int64)
    merged = np.sort(np.concatenate((t, echoes[echoes < dur_ps])))
    return apply_dead_time(merged, d.dead_time)


PHASES = ("baseline", "grating")


def simulate_phase(config, phase: str, rng_seed=None) -> TagStream:
    """One protocol phase: ``baseline`` (grating removed, primary detector at x = 0) or ``grating``."""
    seed = config.run.seed if rng_seed is None else rng_seed
    profile, detectors = config.phase_plan()[phase]
    phase_seed = _seed_words(seed) + [PHASES.index(phase)]
    heralds = generate_heralds(config.source, config.run.duration_s, phase_seed, config.run.chunk_s)
    s = propagate_and_detect(
        heralds, profile, detectors, config.collapse, config.offsets, phase_seed, source=config.source
    )
    s.header["phase"] = phase
    s.header["config_hash"] = config.config_hash()
    return s


def run_experiment(config, rng_seed=None) -> tuple[TagStream, TagStream]:
    """Baseline and grating runs with identical channel offsets."""
    return simulate_phase(config, "baseline", rng_seed), simulate_phase(config, "grating", rng_seed)
