"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -s tests/test_acceptance.py``; the verdict lines
are also repeated in the terminal summary of any pytest run.
"""

import json
import math
import shutil
import time

import numpy as np
from conftest import grid_profile, report_criterion

from einstein27 import constants
from einstein27.analysis import anticorrelation_alpha, correlate, estimate_delay
from einstein27.cli import main
from einstein27.collapse import CollapseModel, spread
from einstein27.config import RunConfig
from einstein27.optics import (
    GratingSpec,
    ScreenGeometry,
    first_order_x,
    order_windows,
    peak_angles,
    relative_intensity,
    sample_position,
    screen_profile,
)
from einstein27.planner import budget_grating, budget_slit
from einstein27.simkit import (
    ChannelOffsets,
    SourceSpec,
    generate_heralds,
    propagate_and_detect,
    simulate_phase,
)


def _three_sig(v):
    return float(f"{v:.3g}")


def test_criterion_1_delay_reproduction():
    t = time.perf_counter()
    g = GratingSpec.reference()
    geom = ScreenGeometry(focal_f=4.0)
    res = spread(screen_profile(g, geom))
    elapsed = time.perf_counter() - t
    q = 4.0 * math.asin(g.wavelength_lambda / g.period_p)
    coeff = res.spread_s / q
    analytic = 8 / (math.pi**2 + 8)
    ok = (
        4.1 <= res.t_delay_ns <= 4.2
        and _three_sig(coeff) == 0.448
        and _three_sig(analytic) == 0.448
        and elapsed < 1.0
    )
    report_criterion(
        1, ok,
        f"T_delay = {res.t_delay_ns:.4f} ns, s/q = {coeff:.5f} (8/(pi^2+8) = {analytic:.5f}), {elapsed:.2f} s",
    )
    assert ok


def test_criterion_2_two_delta_oracle():
    q = 4.0 * math.asin(0.64)
    spacing = 1e-4
    prof = grid_profile([-q / 2, q / 2], [0.5, 0.5], spacing=spacing)
    res = spread(prof)
    s = res.spread_s
    ok = abs(s - q / 2) <= spacing and res.t_delay == s / constants.C
    report_criterion(2, ok, f"spread = {s:.6f} m vs q/2 = {q / 2:.6f} m (bin {spacing:g} m)")
    assert ok


def test_criterion_3_rate_budget():
    b = budget_slit(1e5, 0.25, 5e-3, 3.0, 0.7, 100)
    ok = abs(b.expected_rate - 29.2) <= 0.1 and b.expected_rate < b.dark_rate
    report_criterion(3, ok, f"slit rate = {b.expected_rate:.3f}/s vs dark {b.dark_rate:g}/s")
    assert ok


def test_criterion_4_intensity_structure():
    g = GratingSpec.reference()
    peaks = dict(peak_angles(g))
    theta1 = peaks[1]
    ratio = float(relative_intensity(g, np.array([theta1]))[0] / relative_intensity(g, np.array([0.0]))[0])
    ok = abs(ratio - 4 / math.pi**2) <= 1e-9 and abs(theta1 - math.asin(0.64)) <= 1e-3 and abs(theta1 - 0.694) <= 1e-3
    report_criterion(4, ok, f"I1/I0 = {ratio:.12f} (4/pi^2 = {4 / math.pi**2:.12f}), theta1 = {theta1:.6f} rad")
    assert ok


def _run_experiment(out, model):
    t = time.perf_counter()
    rc = main(["run-experiment", "--out", str(out), "--set", f"collapse.model={model}"])
    rep = json.loads((out / "report.json").read_text())
    return rc, rep, time.perf_counter() - t


def test_criterion_5_hypothesis_discrimination(tmp_path):
    cfg = RunConfig.reference()
    g = cfg.grating
    d = cfg.detector(cfg.run.primary)
    lo, hi = order_windows(g, cfg.screen, 1)
    frac = float(cfg.grating_profile().cdf(hi) - cfg.grating_profile().cdf(lo))
    plan = budget_grating(cfg.source.herald_rate, cfg.source.path_efficiency, frac, d.efficiency, d.dark_rate)

    rc_hk, hk, t_hk = _run_experiment(tmp_path / "hk", "HellwigKraus")
    rc_qm, qm, t_qm = _run_experiment(tmp_path / "qm", "Instantaneous")
    v_hk, v_qm = hk["delta_t"], qm["delta_t"]
    injected = hk["predicted_t_delay_ps"]
    err_hk = v_hk["delta_t"] - injected
    err_qm = v_qm["delta_t"]
    sep = abs(v_hk["delta_t"] - v_qm["delta_t"]) / math.hypot(v_hk["sigma"], v_qm["sigma"])
    measured_rate = hk["phases"]["grating"]["primary_rate"]
    ok = (
        rc_hk == 0 and rc_qm == 0
        and plan.expected_rate >= 3e3
        and cfg.run.duration_s == 60 and cfg.analysis.bin_ps == 2000
        and abs(err_hk) <= 500 and abs(err_qm) <= 500
        and v_hk["verdict"] == "HK-consistent" and v_qm["verdict"] == "QM-consistent"
        and sep >= 5 and v_hk["separation_sigma"] >= 5 and v_qm["separation_sigma"] >= 5
        and t_hk + t_qm <= 120
    )
    report_criterion(
        5, ok,
        f"HK dT = {v_hk['delta_t'] / 1e3:.3f} +/- {v_hk['sigma'] / 1e3:.3f} ns (injected {injected / 1e3:.3f}), "
        f"QM dT = {v_qm['delta_t'] / 1e3:.3f} +/- {v_qm['sigma'] / 1e3:.3f} ns, separation {sep:.1f} sigma, "
        f"planner {plan.expected_rate:.0f}/s, measured {measured_rate:.0f}/s, {t_hk + t_qm:.1f} s",
    )
    assert ok


def _alpha_run(statistics):
    cfg = RunConfig.reference([
        f'source.statistics="{statistics}"',
        "detectors.0.afterpulse_prob=0",
        "detectors.1.afterpulse_prob=0",
    ])
    s = simulate_phase(cfg, "grating")
    h, a, b = s.channel(1), s.channel(2), s.channel(3)
    rng = cfg.analysis.range_ps
    offs = [int(round(estimate_delay(correlate(h, x, cfg.analysis.bin_ps, rng)).tau_star)) for x in (a, b)]
    return anticorrelation_alpha(h, a, b, cfg.analysis.window_ps, *offs)


def test_criterion_6_anticorrelation():
    fock = _alpha_run("Fock1")
    coh = _alpha_run("Coherent")

    # conservation: no darks, no afterpulses, lossless detectors
    cfg = RunConfig.reference()
    src = SourceSpec(path_efficiency=1.0)
    dets = [
        type(d)(**{**d.__dict__, "dark_rate": 0.0, "afterpulse_prob": 0.0, "efficiency": 1.0})
        for d in cfg.detectors
    ]
    h = generate_heralds(src, 2.0, 6)
    _, per = propagate_and_detect(h, cfg.grating_profile(), dets, CollapseModel.HELLWIG_KRAUS,
                                  ChannelOffsets(), 6, source=src, diagnostics=True)
    ok = (
        fock.n_heralds >= 1e5 and fock.alpha_upper95 < 0.1
        and abs(coh.alpha - 1) <= 0.1
        and per.max() <= 1 and per.sum() > 0
    )
    report_criterion(
        6, ok,
        f"Fock1 alpha = {fock.alpha:.4f} (95% UL {fock.alpha_upper95:.4f}, {fock.n_heralds} heralds), "
        f"Coherent alpha = {coh.alpha:.3f} +/- {coh.alpha_sigma:.3f}, max detections per herald = {per.max()}",
    )
    assert ok


def _brute(ref, sig, bw, rng):
    tau = np.subtract.outer(sig, ref).ravel()
    tau = tau[(tau >= rng[0]) & (tau < rng[1])]
    return np.bincount((tau - rng[0]) // bw, minlength=(rng[1] - rng[0]) // bw)


def test_criterion_7_estimator_oracle():
    mismatches = 0
    pairs = 0
    for seed in range(100):
        r = np.random.default_rng([7, seed])
        span = int(r.integers(10**5, 10**7))
        a = np.sort(r.integers(0, span, int(r.integers(1, 1001))))
        b = np.sort(r.integers(0, span, int(r.integers(1, 1001))))
        bw = int(r.choice([500, 1000, 2000]))
        n = int(r.integers(1, 60))
        rng = (-n * bw, n * bw)
        h = correlate(a, b, bw, rng)
        ref = _brute(a, b, bw, rng)
        pairs += int(ref.sum())
        mismatches += int(not np.array_equal(h.counts, ref))
    ok = mismatches == 0
    report_criterion(7, ok, f"{100 - mismatches}/100 stream pairs identical ({pairs} pairs total)")
    assert ok


def _dir_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_criterion_8_determinism(tmp_path, capsys):
    small = ["--set", "screen.sample_count=262144", "--set", "run.duration_s=2"]
    commands = [
        ["pattern", "--plot"],
        ["spread"],
        ["plan"],
        ["simulate", "--phase", "baseline"],
        ["simulate", "--phase", "grating", "--format", "csv"],
        ["run-experiment", "--plot"],
    ]
    outputs = []
    out = tmp_path / "run"
    for _ in range(2):
        # identical arguments each time, including output paths
        shutil.rmtree(out, ignore_errors=True)
        stdout = {}
        for i, cmd in enumerate(commands):
            main([*cmd, "--out", str(out), *small])
            stdout[i] = capsys.readouterr().out
        main(["analyze", str(out / "baseline.ett"), str(out / "grating.ett"), "--alpha", "D2,D3",
              "--plot", "--out", str(out / "analysis"), *small])
        main(["convert", str(out / "grating.csv"), str(out / "converted.ett")])
        capsys.readouterr()
        outputs.append((_dir_bytes(out), stdout))
    (fa, sa), (fb, sb) = outputs
    ok = fa == fb and sa == sb and len(fa) >= 12
    report_criterion(8, ok, f"{len(fa)} output files and {len(sa)} stdout captures byte-identical across reruns")
    assert ok


def test_criterion_9_sampling_fidelity(reference_profile):
    n = 100_000
    u = np.random.default_rng(9).random(n)
    x = np.sort(sample_position(reference_profile, u))
    f = reference_profile.cdf(x)
    i = np.arange(1, n + 1)
    ks = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    ok = ks < 0.01
    report_criterion(9, ok, f"KS distance = {ks:.5f} for {n} samples")
    assert ok


def test_detector_placement_matches_orders():
    # sanity link between criteria 4 and 5: detectors sit on the first orders
    cfg = RunConfig.reference()
    x1 = first_order_x(cfg.grating, cfg.screen, 1)
    assert cfg.detector("D2").position_x == x1 == -cfg.detector("D3").position_x
