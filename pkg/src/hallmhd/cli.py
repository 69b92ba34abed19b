"""Command-line entry point: ``hallmhd <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decay import bootstrap_exponent, diff_decay_exponent, fit_exponent, two_sided_fit
from .harness import ExperimentConfig, amplitude_scan, profile_config, read_csv, run

log = logging.getLogger("hallmhd")


def _common(p: argparse.ArgumentParser, run_dir: bool = False) -> None:
    p.add_argument("--config", type=Path, help="experiment configuration (JSON)")
    p.add_argument("--output", type=Path, help="run directory to write (or read)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--profile", choices=("desk", "smoke"), default="desk",
                   help="preset used when no --config is given (default: desk)")
    if run_dir:
        p.add_argument("--run", type=Path, help="existing run directory to analyse instead of running")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else profile_config(args.profile)
    return cfg.with_overrides(seed=args.seed, output_dir=str(args.output) if args.output else None)


def _run_dir(args) -> Path:
    """The run to analyse: ``--run`` if given, else a fresh run of the configuration."""
    if getattr(args, "run", None):
        if not (args.run / "manifest.json").exists():
            raise FileNotFoundError(f"{args.run} is not a run directory (no manifest.json)")
        return args.run
    cfg = _config(args)
    result = run(cfg)
    if not result.ok:
        raise RuntimeError(f"run failed: {result.manifest.get('error')}")
    return result.directory


def _need(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing input {path}; was the diagnostic enabled?")
    return path


def cmd_simulate(args) -> int:
    result = run(_config(args))
    print(json.dumps(result.manifest, indent=2, sort_keys=True))
    return result.exit_code


def cmd_heat_compare(args) -> int:
    d = _run_dir(args)
    cfg = ExperimentConfig.load(d / "config.json")
    _, body = read_csv(_need(d / "difference.csv"))
    _, eb = read_csv(_need(d / "energy.csv"))
    window = cfg.window("difference")
    fe = fit_exponent(eb[:, 0], eb[:, 1], cfg.window("energy"))
    fd = fit_exponent(body[:, 0], body[:, 1], window, allow_log=True)
    fh = fit_exponent(body[:, 0], body[:, 2], window)
    alpha = min(max(fh.exponent, 0.0), 2.5)
    predicted, flag = diff_decay_exponent(alpha)
    print(f"window             [{window[0]:g}, {window[1]:g}]")
    print(f"heat exponent      {fh.exponent:.4f}  (alpha)")
    print(f"energy exponent    {fe.exponent:.4f}")
    print(f"difference         {fd.exponent:.4f}{'  (log^2 corrected)' if fd.log_correction else ''}")
    print(f"predicted          {predicted:g}{'  with log^2 factor' if flag else ''}")
    return 0


def cmd_gevrey_track(args) -> int:
    d = _run_dir(args)
    cfg = ExperimentConfig.load(d / "config.json")
    header, body = read_csv(_need(d / "gevrey.csv"))
    window = cfg.window("gevrey")
    t = body[:, 0]
    sel = (t >= window[0]) & (t <= window[1])
    M, ratio, tau_est, resolved = body[:, 7], body[:, 8], body[:, 9], body[:, 10]
    print(f"snapshots          {len(t)} ({int(sel.sum())} in window), {int((resolved == 0).sum())} unresolved")
    print(f"M_r finite         {bool(np.all(np.isfinite(M)))}")
    r = ratio[sel]
    if r.size and np.all(r > 0):
        print(f"ratio max/min      {r.max() / r.min():.4f}")
    ok = sel & np.isfinite(tau_est)
    if ok.sum() >= 2:
        slope, _ = np.polyfit(t[ok], tau_est[ok] ** 2, 1)
        print(f"tau_est^2 slope    {slope:.5g} per unit time ({int(ok.sum())} snapshots)")
    return 0


def cmd_decay_fit(args) -> int:
    if args.csv is None:
        d = _run_dir(args)
        args.csv = d / "energy.csv"
    header, body = read_csv(_need(args.csv))
    t, y = body[:, 0], body[:, args.column]
    window = tuple(args.window) if args.window else (max(1.0, float(t[t >= 1].min())), float(t.max()))
    fit = fit_exponent(t, y, window, allow_log=args.allow_log)
    out = {"quantity": header[args.column], **fit.to_dict()}
    if args.envelopes:
        env = two_sided_fit(t, y, window)
        out["lower_envelope_exponent"] = env.lower.exponent
        out["upper_envelope_exponent"] = env.upper.exponent
    print(json.dumps(out, indent=2))
    return 0


def cmd_amplitude_scan(args) -> int:
    points, largest = amplitude_scan(_config(args), args.amplitudes, args.growth_limit, args.t_end)
    print(f"{'amplitude':>10} {'bounded':>8} {'max M_r/M_r(0)':>15}  note")
    for p in points:
        print(f"{p.amplitude:>10.4g} {str(p.bounded):>8} {p.growth:>15.4g}  {p.reason}")
    print("largest bounded amplitude: " + ("none" if largest is None else f"{largest:g}"))
    return 0


def cmd_bootstrap(args) -> int:
    res = bootstrap_exponent(args.alpha)
    print(res.format_trace())
    return 0


def cmd_moments(args) -> int:
    d = _run_dir(args)
    mm = json.loads(_need(d / "moments.json").read_text())
    np.set_printoptions(precision=5, suppress=False)
    for key in ("A_tilde", "C_tilde", "xB0"):
        print(f"{key}:\n{np.array(mm[key])}")
    print(f"symmetry defect      {mm['symmetry_defect']:.3e}")
    print(f"antisymmetry defect  {mm['antisymmetry_defect']:.3e}")
    m0 = mm["m0"]
    print(f"M0 scalar defect     {m0['scalar_defect']:.4f} +- {100 * m0['horizon_error']:.1f}% (horizon)")
    print(f"M0 C defect          {m0['C_defect']:.4f}")
    print(f"M0 member            {m0['is_member']}")
    return 0


def cmd_acceptance(args) -> int:
    from .acceptance import format_table, run_acceptance

    workdir = args.output or Path(f"runs/acceptance-{args.profile}")
    results = run_acceptance(args.profile, workdir=workdir, criteria=args.criteria,
                             reuse=not args.fresh, echo=print)
    print(format_table(results).splitlines()[-1])
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hallmhd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment and write its outputs")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("heat-compare", help="difference-from-heat-flow decay of a run")
    _common(p, run_dir=True)
    p.set_defaults(func=cmd_heat_compare)

    p = sub.add_parser("gevrey-track", help="Gevrey norm and radius summary of a run")
    _common(p, run_dir=True)
    p.set_defaults(func=cmd_gevrey_track)

    p = sub.add_parser("amplitude-scan", help="largest initial amplitude with bounded Gevrey tracking")
    _common(p)
    p.add_argument("--amplitudes", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.5, 1.0, 2.0])
    p.add_argument("--growth-limit", type=float, default=10.0,
                   help="largest accepted max M_r(t) / M_r(0) (default 10)")
    p.add_argument("--t-end", type=float, help="shorter horizon than the configuration's")
    p.set_defaults(func=cmd_amplitude_scan)

    p = sub.add_parser("decay-fit", help="fit a power law to a CSV column")
    _common(p, run_dir=True)
    p.add_argument("--csv", type=Path, help="CSV with t in column 0 (default: the run's energy.csv)")
    p.add_argument("--column", type=int, default=1, help="value column (default 1)")
    p.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    p.add_argument("--allow-log", action="store_true", help="also try the log^2-corrected model")
    p.add_argument("--envelopes", action="store_true", help="add 0.1/0.9 quantile envelope fits")
    p.set_defaults(func=cmd_decay_fit)

    p = sub.add_parser("bootstrap", help="print the exponent bootstrap trace")
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("moments", help="moment matrices and class membership of a run")
    _common(p, run_dir=True)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("acceptance", help="run the acceptance suite and print a pass/fail table")
    p.add_argument("--output", type=Path, help="directory for the shared run (default runs/acceptance-PROFILE)")
    p.add_argument("--profile", choices=("desk", "smoke"), default="desk")
    p.add_argument("--criteria", type=int, nargs="+", help="subset of criterion numbers")
    p.add_argument("--fresh", action="store_true", help="recompute the shared run even if cached")
    p.set_defaults(func=cmd_acceptance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, RuntimeError, ValueError) as exc:
        print(f"hallmhd {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
