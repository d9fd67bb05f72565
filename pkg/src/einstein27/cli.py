"""Command-line interface.

    einstein27 [--config PATH] [--seed N] [--out DIR] [--format csv|bin] [--set k=v] [--plot] COMMAND

Commands: pattern, spread, plan, simulate, analyze, run-experiment, convert.
Without ``--config`` the built-in grating experiment is used.

Exit codes: 0 success, 3 configuration error, 4 I/O error, 5 analysis
inconclusive, 6 malformed data (tag file or missing channel).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import __version__, constants
from .analysis import (
    INCONCLUSIVE,
    AnalysisError,
    InsignificantPeakError,
    anticorrelation_alpha,
    correlate,
    delta_t_test,
    estimate_delay,
    report_json,
)
from .collapse import is_narrow, spread
from .config import ConfigError, RunConfig
from .optics import IntensityProfile, ProfileError, order_windows, peak_table, write_peak_table
from .planner import budget_csv, budget_grating, budget_slit, budget_table, echo_ceiling
from .simkit import HERALD_NAME, PHASES, TagFormatError, read_tags, simulate_phase, write_tags

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_INCONCLUSIVE = 5
EXIT_DATA = 6


class DataError(Exception):
    pass


def _load_config(args) -> RunConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"run.seed={int(args.seed)}")
    if args.config in (None, "reference"):
        return RunConfig.reference(overrides)
    return RunConfig.load(args.config, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tag_suffix(fmt):
    return ".csv" if fmt == "csv" else ".ett"


def _predicted_ps(cfg: RunConfig) -> float:
    """Delay shift expected under covariant reduction, grating run minus baseline."""
    plan = cfg.phase_plan()
    t1 = spread(plan["grating"][0]).t_delay
    t0 = spread(plan["baseline"][0]).t_delay
    return (t1 - t0) * constants.PS_PER_S


# -- commands ---------------------------------------------------------------


def cmd_pattern(args, cfg: RunConfig):
    out = _out_dir(args)
    if cfg.grating is None:
        profile, rows = cfg.spot_profile(), []
    else:
        profile = cfg.grating_profile()
        rows = peak_table(cfg.grating, cfg.screen, profile)
    profile.to_csv(out / "profile.csv")
    write_peak_table(rows, out / "peaks.csv")
    print(f"{'order':>5s} {'x_m':>10s} {'rel_height':>11s} {'fraction':>9s}")
    for r in rows:
        print(f"{r.order:5d} {r.x:10.4f} {r.relative_height:11.6f} {r.fraction:9.5f}")
    if profile.truncated:
        print("warning: screen extent truncates the outermost propagating order")
    if args.plot:
        from .plotting import plot_pattern

        plot_pattern(profile, rows, out / "pattern.png")
    return EXIT_OK


def cmd_spread(args, cfg: RunConfig):
    if args.profile:
        try:
            profile = IntensityProfile.from_csv(args.profile)
        except OSError as exc:
            raise OSError(f"cannot read profile {args.profile}: {exc.strerror}") from None
    else:
        profile = cfg.screen_profile()
    res = spread(profile)
    resolution = min(d.resolution_fwhm for d in cfg.detectors) if cfg.detectors else constants.RESOLUTION_FWHM
    print(f"spread_s_m: {res.spread_s:.6f}")
    print(f"t_delay_ns: {res.t_delay_ns:.3f}")
    print(f"narrow: {'yes' if is_narrow(profile, resolution) else 'no'}")
    print(f"model: {cfg.collapse.value}")
    return EXIT_OK


def _grating_fraction(cfg: RunConfig, order=1):
    if cfg.grating is None:
        return None
    profile = cfg.grating_profile()
    lo, hi = order_windows(cfg.grating, cfg.screen, order)
    return float(profile.cdf(hi) - profile.cdf(lo))


def cmd_plan(args, cfg: RunConfig):
    src = cfg.source
    det = cfg.detector(cfg.run.primary)
    slit = budget_slit(src.herald_rate, src.path_efficiency, det.aperture_diameter, args.slit_extent,
                       det.efficiency, det.dark_rate)
    budgets = [slit]
    frac = args.peak_fraction if args.peak_fraction is not None else _grating_fraction(cfg)
    if frac is not None:
        budgets.append(budget_grating(src.herald_rate, src.path_efficiency, frac, det.efficiency, det.dark_rate))
        quoted = budget_grating(src.herald_rate, src.path_efficiency, 0.2, det.efficiency, det.dark_rate)
        budgets.append(type(quoted)(**{**quoted.to_dict(), "scenario": "grating@0.2"}))
    text = budget_table(budgets)
    echo = echo_ceiling(src.herald_rate)
    text += f"herald rate {echo.requested_rate:.3g}/s: {echo.level} ({echo.message})\n"
    print(text, end="")
    out = _out_dir(args)
    (out / "plan.csv").write_text(budget_csv(budgets))
    (out / "plan.txt").write_text(text)
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig):
    out = _out_dir(args)
    stream = simulate_phase(cfg, args.phase)
    path = Path(args.output) if args.output else out / f"{args.phase}{_tag_suffix(args.format)}"
    write_tags(stream, path, args.format)
    for ch, n in stream.counts().items():
        print(f"channel {ch}: {n} tags ({n / cfg.run.duration_s:.1f}/s)")
    print(f"wrote {path}")
    return EXIT_OK


def _channel(stream, name):
    try:
        ch = stream.channel_by_name(name)
    except KeyError as exc:
        raise DataError(str(exc)) from None
    if stream.channel(ch).size == 0:
        raise DataError(f"channel {name} ({ch}) has no tags")
    return ch


def _analyze_stream(stream, cfg: RunConfig, ref: str, sig: str):
    a = cfg.analysis
    h = correlate(stream.channel(_channel(stream, ref)), stream.channel(_channel(stream, sig)), a.bin_ps, a.range_ps)
    return h, estimate_delay(h, a.min_significance)


def _alpha(stream, cfg: RunConfig, ref: str, pair):
    """Heralded anticorrelation, each detector aligned at its measured coincidence peak."""
    a = cfg.analysis
    offsets = []
    for name in pair:
        _, est = _analyze_stream(stream, cfg, ref, name)
        if not est.peak_found:
            return None
        offsets.append(int(round(est.tau_star)))
    ch = [_channel(stream, n) for n in (ref, *pair)]
    r = anticorrelation_alpha(stream.channel(ch[0]), stream.channel(ch[1]), stream.channel(ch[2]),
                              a.window_ps, offsets[0], offsets[1])
    return {"detectors": list(pair), "offsets_ps": offsets, **r.counts, "alpha": r.alpha,
            "alpha_sigma": r.alpha_sigma, "alpha_upper95": r.alpha_upper95, "window_ps": r.window}


def _estimate_doc(est):
    return {
        "tau_star_ps": est.tau_star,
        "uncertainty_ps": est.uncertainty,
        "peak_counts": est.peak_counts,
        "background_level": est.background_level,
        "significance_sigma": est.significance_sigma,
        "sub_bin_refined": est.sub_bin_refined,
        "peak_found": est.peak_found,
        "peak_sigma_ps": est.peak_sigma,
    }


def _verdict_doc(ests, predicted_ps, cfg: RunConfig):
    a = cfg.analysis
    try:
        v = delta_t_test(ests[0], ests[1], predicted_ps, a.min_significance, a.k_sigma)
    except InsignificantPeakError as exc:
        return {
            "verdict": INCONCLUSIVE,
            "reason": f"low statistics: {exc}",
            "predicted_t_delay_ps": predicted_ps,
            "significance_sigma": [e.significance_sigma for e in ests],
            "min_significance": a.min_significance,
        }
    return v.to_dict()


def cmd_analyze(args, cfg: RunConfig):
    out = _out_dir(args)
    try:
        streams = [read_tags(p) for p in args.tagfiles]
    except OSError as exc:
        raise OSError(f"cannot read tag file: {exc}") from None
    labels = [Path(p).stem for p in args.tagfiles]
    if len(set(labels)) != len(labels):
        labels = [f"run{i}" for i in range(len(labels))]
    sig_name = args.sig or cfg.run.primary
    report = {"config_hash": cfg.config_hash(), "seed": cfg.run.seed, "inputs": list(map(str, args.tagfiles)),
              "ref": args.ref, "sig": sig_name, "runs": {}}
    hists, ests = {}, {}
    for label, s in zip(labels, streams):
        h, est = _analyze_stream(s, cfg, args.ref, sig_name)
        h.to_csv(out / f"hist_{label}.csv")
        hists[label], ests[label] = h, est
        run = {"header": s.header, "estimate": _estimate_doc(est), "total_pairs": h.total_pairs}
        if args.alpha:
            run["alpha"] = _alpha(s, cfg, args.ref, args.alpha.split(","))
        report["runs"][label] = run
        print(f"{label}: tau* = {est.tau_ns:.3f} ns +/- {est.uncertainty / 1000:.3f} "
              f"({est.significance_sigma:.1f} sigma)")
    code = EXIT_OK
    if len(streams) == 2:
        pred = args.predicted_ns * 1000.0 if args.predicted_ns is not None else _predicted_ps(cfg)
        v = _verdict_doc([ests[labels[0]], ests[labels[1]]], pred, cfg)
        report["delta_t"] = v
        _print_verdict(v)
        if v["verdict"] == INCONCLUSIVE:
            code = EXIT_INCONCLUSIVE
    (out / "analysis.json").write_text(report_json(report))
    if args.plot:
        from .plotting import plot_histograms

        plot_histograms(hists, ests, out / "histograms.png")
    return code


def _print_verdict(v):
    if "delta_t" in v:
        print(f"T1 - T0 = {v['delta_t'] / 1000:.3f} +/- {v['sigma'] / 1000:.3f} ns, "
              f"predicted {v['predicted_t_delay'] / 1000:.3f} ns -> {v['verdict']}")
    else:
        print(f"{v['verdict']}: {v['reason']}")


def cmd_run_experiment(args, cfg: RunConfig):
    if cfg.grating is None:
        raise ConfigError("run-experiment needs a grating section")
    out = _out_dir(args)
    predicted = _predicted_ps(cfg)
    report = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.run.seed,
        "model": cfg.collapse.value,
        "predicted_t_delay_ps": predicted,
        "phases": {},
    }
    hists, ests, problems = {}, {}, []
    det = cfg.detector(cfg.run.primary)
    for phase in PHASES:
        s = simulate_phase(cfg, phase)
        path = out / f"{phase}{_tag_suffix(args.format)}"
        write_tags(s, path, args.format)
        rate = s.counts().get(det.channel, 0) / cfg.run.duration_s
        doc = {"tag_file": path.name, "counts": {str(k): v for k, v in s.counts().items()}, "primary_rate": rate}
        report["phases"][phase] = doc
        try:
            h, est = _analyze_stream(s, cfg, HERALD_NAME, cfg.run.primary)
        except (AnalysisError, DataError) as exc:
            doc["estimate"] = None
            problems.append(f"{phase}: {exc}")
            print(f"{phase}: no delay estimate ({exc})")
            continue
        h.to_csv(out / f"hist_{phase}.csv")
        hists[phase], ests[phase] = h, est
        doc.update(estimate=_estimate_doc(est), total_pairs=h.total_pairs)
        names = [d.name for d in cfg.detectors]
        if phase == "grating" and len(names) >= 2:
            pair = [cfg.run.primary] + [n for n in names if n != cfg.run.primary][:1]
            try:
                doc["alpha"] = _alpha(s, cfg, HERALD_NAME, pair)
            except (AnalysisError, DataError) as exc:
                doc["alpha"] = None
                problems.append(f"alpha: {exc}")
        print(f"{phase}: tau* = {est.tau_ns:.3f} ns +/- {est.uncertainty / 1000:.3f} "
              f"({est.significance_sigma:.1f} sigma), {cfg.run.primary} rate {rate:.1f}/s")
    if len(ests) == 2:
        v = _verdict_doc([ests["baseline"], ests["grating"]], predicted, cfg)
    else:
        v = {"verdict": INCONCLUSIVE, "reason": "low statistics: " + "; ".join(problems),
             "predicted_t_delay_ps": predicted}
    if problems:
        v.setdefault("diagnostics", problems)
    report["delta_t"] = v
    _print_verdict(v)
    (out / "report.json").write_text(report_json(report))
    if args.plot and hists:
        from .plotting import plot_histograms

        plot_histograms(hists, ests, out / "histograms.png")
    return EXIT_INCONCLUSIVE if v["verdict"] == INCONCLUSIVE else EXIT_OK


def cmd_convert(args, cfg):
    try:
        s = read_tags(args.src)
    except OSError as exc:
        raise OSError(f"cannot read {args.src}: {exc.strerror}") from None
    fmt = args.format if args.format_given else None
    write_tags(s, args.dst, fmt)
    print(f"wrote {len(s)} tags to {args.dst}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _global_options(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="run configuration JSON (default: built-in reference setup)")
    p.add_argument("--seed", type=int, default=d(None), help="override run.seed")
    p.add_argument("--out", default=d("out"), help="output directory (default: out)")
    p.add_argument("--format", choices=("csv", "bin"), default=d("bin"), help="tag file format")
    p.add_argument("--set", action="append", default=d(None), metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--plot", action="store_true", default=d(False), help="also render PNG figures")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser():
    parser = argparse.ArgumentParser(prog="einstein27", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", parents=[common], help="tabulate the screen intensity and its peaks")
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("spread", parents=[common], help="spread and collapse delay of the screen profile")
    p.add_argument("--profile", help="profile CSV (x_m,weight) instead of the configured pattern")
    p.set_defaults(func=cmd_spread)

    p = sub.add_parser("plan", parents=[common], help="count-rate budget, slit vs grating")
    p.add_argument("--slit-extent", type=float, default=constants.SLIT_SPREAD_EXTENT,
                   help="beam spread on the screen for the single-aperture case (m)")
    p.add_argument("--peak-fraction", type=float, default=None,
                   help="override the lateral peak power fraction")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="simulate one protocol phase to a tag file")
    p.add_argument("--phase", choices=PHASES, default="grating")
    p.add_argument("--output", help="tag file path (default: OUT/PHASE.ett or .csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="coincidence analysis of tag files")
    p.add_argument("tagfiles", nargs="+", help="one file, or baseline and grating files")
    p.add_argument("--ref", default=HERALD_NAME, help="reference channel name or id (default D1)")
    p.add_argument("--sig", default=None, help="signal channel name or id (default run.primary)")
    p.add_argument("--alpha", metavar="A,B", help="also compute the anticorrelation parameter for A,B")
    p.add_argument("--predicted-ns", type=float, default=None, help="predicted delay shift (default from config)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run-experiment", parents=[common], help="full two-phase protocol and verdict")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("convert", parents=[common], help="convert a tag file between CSV and ETT1")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.format_given = any(a == "--format" or a.startswith("--format=") for a in argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            cfg = _load_config(args)
            return args.func(args, cfg)
    except (ConfigError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TagFormatError, DataError, AnalysisError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
