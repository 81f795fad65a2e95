"""Command-line front end for the traffic gas toolkit.

Five subcommands cover the analysis surface:

* exact    -- closed-form and integral number variance curves for one beta
* sample   -- seeded Monte Carlo spacings and their empirical variance
* variance -- variance statistics of a plain gap file (time-gap moving
              averages, or window counts of the values read as spacings)
* analyze  -- the full detector pipeline: windows, density bins, per-bin
              chi/gamma/beta fits, fundamental diagram, optional plot pack
* synth    -- synthetic detector records for a density -> beta profile

Every output table starts with comment lines naming the tool version, the
resolved configuration hash, the random seed when one is in play, and the
column names with units, so runs are reproducible and diffable. Exit codes:
0 success (flags allowed), 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__, gas, rigidity, trafficdata


class UsageError(ValueError):
    """Bad argument values; maps to exit code 2."""


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def _resolve_seed(args, cfg: dict) -> int:
    seed = args.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (1 << 63))
    cfg["seed"] = int(seed)
    return int(seed)


def _l_grid(args) -> np.ndarray:
    if args.l_step <= 0:
        raise UsageError("--l-step must be positive")
    if args.l_min <= 0 or args.l_max < args.l_min:
        raise UsageError("need 0 < --l-min <= --l-max")
    n = int(math.floor((args.l_max - args.l_min) / args.l_step + 1e-9)) + 1
    return args.l_min + args.l_step * np.arange(n)


def _require_beta(args) -> float:
    if args.beta is None:
        raise UsageError("--beta is required for this command")
    if args.beta < 0 or not math.isfinite(args.beta):
        raise UsageError(f"--beta must be a finite non-negative real, got {args.beta}")
    return float(args.beta)


def _header(command: str, cfg: dict, columns: str, units: str) -> list[str]:
    lines = [
        f"# trafficgas {__version__}",
        f"# command: {command}  config-hash: {_config_hash(cfg)}",
    ]
    if "seed" in cfg:
        lines.append(f"# seed: {cfg['seed']}")
    lines.extend([f"# columns: {columns}", f"# units: {units}"])
    return lines


def _emit(path, lines) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def cmd_exact(args) -> int:
    beta = _require_beta(args)
    grid = _l_grid(args)
    cfg = {"command": "exact", "beta": beta, "l_min": args.l_min,
           "l_max": args.l_max, "l_step": args.l_step, "tol": args.tol}
    chi = rigidity.chi_coefficient(beta)
    gam = rigidity.gamma_coefficient(beta)
    lines = _header("exact", cfg,
                    "L, delta_n_asymptotic, delta_n_integral, chi, gamma",
                    "all dimensionless (unfolded axis)")
    for L in grid:
        integ = rigidity.number_variance_integral(beta, float(L), args.tol)
        lines.append(",".join([_fmt(L), _fmt(chi * L + gam), _fmt(integ),
                               _fmt(chi), _fmt(gam)]))
    _emit(args.output, lines)
    return 0


def cmd_sample(args) -> int:
    beta = _require_beta(args)
    if args.count is None or args.count < 1:
        raise UsageError("--count must be a positive integer")
    grid = _l_grid(args)
    cfg = {"command": "sample", "beta": beta, "count": args.count,
           "l_min": args.l_min, "l_max": args.l_max, "l_step": args.l_step}
    seed = _resolve_seed(args, cfg)
    seq = gas.sample_spacings(gas.make_gas(beta), args.count, seed)
    if args.spacings_out:
        with open(args.spacings_out, "w", encoding="utf-8") as fh:
            fh.write(f"# trafficgas {__version__} raw spacings, beta={beta}, seed={seed}\n")
            for v in seq.spacings:
                fh.write(f"{float(v)!r}\n")
    curve = rigidity.empirical_number_variance(seq.unfolded(), grid)
    lines = _header("sample", cfg,
                    "L, delta_n_empirical, window_count",
                    "L and variance dimensionless, window_count is a count")
    for i in range(grid.size):
        lines.append(",".join([_fmt(curve.scales[i]), _fmt(curve.variances[i]),
                               str(int(curve.window_counts[i]))]))
    _emit(args.output, lines)
    return 0


def _read_values(path) -> np.ndarray:
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            vals.append(float(line.split(",")[0]))
    if not vals:
        raise RuntimeError(f"no values found in {path}")
    return np.asarray(vals)


def cmd_variance(args) -> int:
    if args.input is None:
        raise UsageError("--input is required for the variance command")
    values = _read_values(args.input)
    cfg = {"command": "variance", "input": str(args.input), "kind": args.kind,
           "l_min": args.l_min, "l_max": args.l_max, "l_step": args.l_step}
    if args.kind == "timegap":
        n_grid = np.unique(_l_grid(args).astype(np.int64))
        curve = rigidity.timegap_variance(values, n_grid)
        columns = "N, delta_t, window_count"
        units = "N gaps per average, delta_t in squared input units"
    else:
        seq = gas.SpacingSequence(values).unfolded()
        curve = rigidity.empirical_number_variance(seq, _l_grid(args))
        columns = "L, delta_n, window_count"
        units = "dimensionless (input unfolded to unit mean)"
    lines = _header("variance", cfg, columns, units)
    exponent, prefactor = rigidity.fit_power_law(curve)
    lines.append(f"# power-law fit: exponent={exponent!r} prefactor={prefactor!r}")
    for i in range(curve.scales.size):
        lines.append(",".join([_fmt(curve.scales[i]), _fmt(curve.variances[i]),
                               str(int(curve.window_counts[i]))]))
    _emit(args.output, lines)
    return 0


def _analyze_pipeline(args):
    records = trafficdata.load_records(args.input)
    if len(records) == 0:
        raise RuntimeError(f"input {args.input} contains no records")
    windows = trafficdata.aggregate(records, args.window_seconds)
    gaps = trafficdata.extract_gaps(records)
    bin_width = args.rho_max / args.bins
    bins = trafficdata.bin_by_density(gaps, windows, bin_width=bin_width,
                                      rho_max=args.rho_max, min_gaps=args.min_bin_gaps)
    grid = _l_grid(args)
    analyzed = []
    for b in bins:
        if "unreliable" in b.flags:
            analyzed.append(b)
            continue
        try:
            analyzed.append(trafficdata.analyze_bin(b, grid, args.l_fit_min))
        except (ValueError, rigidity.ClusterTruncationError) as exc:
            analyzed.append(dataclasses.replace(
                b, flags=b.flags + (f"fit_failed: {exc}",)))
    return windows, analyzed


def _bin_rows(analyzed) -> list[str]:
    rows = []
    for b in analyzed:
        flags = ";".join(b.flags) if b.flags else "-"
        rows.append(",".join([
            _fmt(b.rho_center), str(b.record_count), _fmt(b.chi_hat),
            _fmt(b.gamma_hat), _fmt(b.beta_hat), _fmt(b.flow_mean), flags]))
    return rows


def _emit_plot_pack(base: str, analyzed, windows, args) -> None:
    grid = _l_grid(args)
    fitted = [b for b in analyzed if math.isfinite(b.chi_hat)]
    chosen = sorted(fitted, key=lambda b: -b.record_count)[:4]
    curves = [rigidity.empirical_number_variance(b.clearances_unfolded, grid)
              for b in chosen]
    with open(base + ".curves.tsv", "w", encoding="utf-8") as fh:
        fh.write("# number variance per density bin\n")
        labels = "\t".join(f"rho_{b.rho_center:g}" for b in chosen)
        fh.write(f"L\t{labels}\n" if chosen else "L\n")
        for i in range(grid.size):
            cells = "\t".join(_fmt(c.variances[i]) for c in curves)
            fh.write(f"{_fmt(grid[i])}\t{cells}\n")
    fd = trafficdata.fundamental_diagram(windows, args.rho_max / args.bins)
    fd_beta = {b.rho_center: (b.beta_hat, b.chi_hat) for b in fitted}
    with open(base + ".fd.tsv", "w", encoding="utf-8") as fh:
        fh.write("# rho_center\tJ_mean\tJ_prime\tbeta_hat\tchi_hat\n")
        for i in range(fd.rho.size):
            bh, ch = fd_beta.get(float(fd.rho[i]), (math.nan, math.nan))
            fh.write("\t".join([_fmt(fd.rho[i]), _fmt(fd.flow[i]),
                                _fmt(fd.flow_derivative[i]), _fmt(bh), _fmt(ch)]) + "\n")
    if chosen:
        curve_plot = (f'plot for [i=2:{len(chosen) + 1}] "{base}.curves.tsv" '
                      "using 1:i with linespoints title columnheader(i)")
    else:
        curve_plot = "# no fitted bins; number-variance panel skipped"
    script = f"""# gnuplot script generated by trafficgas {__version__}
set terminal svg size 1200,900
set output "{base}.svg"
set multiplot layout 2,2
set key top left
set xlabel "L"
set ylabel "Delta_N(L)"
{curve_plot}
set xlabel "rho [veh/km/lane]"
set ylabel "chi, beta"
plot "{base}.fd.tsv" using 1:5 with points title "chi(rho)", \\
     "{base}.fd.tsv" using 1:4 with points title "beta(rho)"
set ylabel "J [veh/h]"
set y2label "beta"
set y2tics
plot "{base}.fd.tsv" using 1:2 with linespoints title "J(rho)", \\
     "{base}.fd.tsv" using 1:4 axes x1y2 with points title "beta(rho)"
set ylabel "beta"
set y2label "J' [km/h]"
plot "{base}.fd.tsv" using 1:4 with points title "beta(rho)", \\
     "{base}.fd.tsv" using 1:3 axes x1y2 with lines title "J'(rho)"
unset multiplot
"""
    with open(base + ".gnuplot", "w", encoding="utf-8") as fh:
        fh.write(script)


def cmd_analyze(args) -> int:
    if args.input is None:
        raise UsageError("--input is required for the analyze command")
    if args.bins < 1 or args.rho_max <= 0:
        raise UsageError("need --bins >= 1 and --rho-max > 0")
    cfg = {"command": "analyze", "input": str(args.input),
           "window_seconds": args.window_seconds, "bins": args.bins,
           "rho_max": args.rho_max, "l_fit_min": args.l_fit_min,
           "min_bin_gaps": args.min_bin_gaps, "l_min": args.l_min,
           "l_max": args.l_max, "l_step": args.l_step}
    windows, analyzed = _analyze_pipeline(args)
    lines = _header(
        "analyze", cfg,
        "rho_center, record_count, chi_hat, gamma_hat, beta_hat, J_mean, flags",
        "rho in veh/km/lane, J in veh/h, counts and fit values dimensionless")
    lines.extend(_bin_rows(analyzed))
    _emit(args.output, lines)
    if args.output:
        def num(x: float):
            return x if math.isfinite(x) else None

        def regime(rho: float) -> str:
            if rho < trafficdata.FREE_FLOW_RHO_MAX:
                return "free"
            if rho > trafficdata.CONGESTED_RHO_MIN:
                return "congested"
            return "transitional"

        summary = {
            "version": __version__,
            "config": cfg,
            "config_hash": _config_hash(cfg),
            "bins": [
                {"rho_center": b.rho_center, "regime": regime(b.rho_center),
                 "record_count": b.record_count,
                 "chi_hat": num(b.chi_hat), "gamma_hat": num(b.gamma_hat),
                 "beta_hat": num(b.beta_hat), "flow_mean": num(b.flow_mean),
                 "flags": list(b.flags)}
                for b in analyzed
            ],
        }
        with open(args.output + ".summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
    if args.emit_plot:
        base = args.output if args.output else "analysis"
        _emit_plot_pack(base, analyzed, windows, args)
    return 0


def _parse_profile(text: str) -> dict[float, float]:
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            pairs = [p for line in fh
                     for p in line.replace(",", " ").split()
                     if p and not p.startswith("#")]
    else:
        pairs = [p for p in text.split(",") if p]
    profile: dict[float, float] = {}
    for pair in pairs:
        try:
            rho_s, beta_s = pair.split(":")
            rho, beta = float(rho_s), float(beta_s)
        except ValueError:
            raise UsageError(f"bad profile entry {pair!r}; expected rho:beta") from None
        if not 0.0 <= rho <= 85.0:
            raise UsageError(f"profile density {rho} outside [0, 85] veh/km/lane")
        if beta < 0 or not math.isfinite(beta):
            raise UsageError(f"profile beta {beta} must be finite and non-negative")
        profile[rho] = beta
    if not profile:
        raise UsageError("empty profile")
    return profile


def cmd_synth(args) -> int:
    if args.profile is None:
        raise UsageError("--profile is required for the synth command")
    if args.output is None:
        raise UsageError("--output is required for the synth command")
    if args.duration <= 0:
        raise UsageError("--duration must be positive")
    if args.lanes < 1:
        raise UsageError("--lanes must be a positive integer")
    profile = _parse_profile(args.profile)
    cfg = {"command": "synth", "profile": sorted(profile.items()),
           "duration": args.duration, "lanes": args.lanes,
           "output": str(args.output)}
    seed = _resolve_seed(args, cfg)
    records = trafficdata.synth_generate(profile, args.duration, args.lanes, seed)
    header = _header("synth", cfg, "timestamp_s, lane_id, speed_kmh",
                     "time in s, speed in km/h")
    with open(args.output, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        for i in range(len(records)):
            fh.write(f"{float(records.timestamp[i])!r},{int(records.lane[i])},"
                     f"{float(records.speed[i])!r}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficgas",
        description="Number-variance analysis of traffic as a thermal gas of vehicles.")
    parser.add_argument("--version", action="version", version=f"trafficgas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, l_min=2.0, l_max=20.0, l_step=1.0):
        p.add_argument("--beta", type=float, default=None, help="inverse temperature")
        p.add_argument("--l-min", type=float, default=l_min)
        p.add_argument("--l-max", type=float, default=l_max)
        p.add_argument("--l-step", type=float, default=l_step)
        p.add_argument("--count", type=int, default=None, help="number of spacings")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--input", type=str, default=None)
        p.add_argument("--output", type=str, default=None)
        p.add_argument("--window-seconds", type=float, default=60.0)
        p.add_argument("--bins", type=int, default=85)
        p.add_argument("--rho-max", type=float, default=85.0)
        p.add_argument("--l-fit-min", type=float, default=10.0)
        p.add_argument("--min-bin-gaps", type=int, default=1000)
        p.add_argument("--emit-plot", action="store_true")
        p.add_argument("--tol", type=float, default=1e-6,
                       help="cluster-sum truncation tolerance")

    p_exact = sub.add_parser("exact", help="closed-form and integral variance curves")
    common(p_exact)
    p_exact.set_defaults(handler=cmd_exact)

    p_sample = sub.add_parser("sample", help="seeded sampling and empirical variance")
    common(p_sample)
    p_sample.add_argument("--spacings-out", type=str, default=None,
                          help="write the raw sampled spacings to this file")
    p_sample.set_defaults(handler=cmd_sample)

    p_var = sub.add_parser("variance", help="variance statistics of a gap file")
    common(p_var, l_min=1.0, l_max=100.0, l_step=1.0)
    p_var.add_argument("--kind", choices=("timegap", "number"), default="timegap")
    p_var.set_defaults(handler=cmd_variance)

    p_an = sub.add_parser("analyze", help="full detector-data pipeline")
    common(p_an)
    p_an.set_defaults(handler=cmd_analyze)

    p_sy = sub.add_parser("synth", help="generate synthetic detector records")
    common(p_sy)
    p_sy.add_argument("--profile", type=str, default=None,
                      help="rho:beta pairs, comma separated, or @file")
    p_sy.add_argument("--duration", type=float, default=3600.0,
                      help="seconds of traffic per profile level")
    p_sy.add_argument("--lanes", type=int, default=1)
    p_sy.set_defaults(handler=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
